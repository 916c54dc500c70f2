#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "classb/errors.hpp"
#include "classb/expr.hpp"

namespace classb {

/// Dense row-major square-or-rectangular matrix over any value type.
template <class T>
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T()) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n, T zero, T one) {
        Matrix m(n, n, zero);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = one;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using NumMatrix = Matrix<double>;
using ExprMatrix = Matrix<Expr>;
using NumberMatrix = Matrix<Number>;
using Vector = std::vector<double>;

template <class T>
Matrix<T> operator*(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.rows()) throw ArgumentError("matrix product: shape mismatch");
    Matrix<T> c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            T acc = a(i, 0) * b(0, j);
            for (std::size_t k = 1; k < a.cols(); ++k) acc = acc + a(i, k) * b(k, j);
            c(i, j) = acc;
        }
    return c;
}

// ---- cofactor expansion (small m, exact for Number and symbolic for Expr) ----

template <class T>
Matrix<T> minor_of(const Matrix<T>& a, std::size_t row, std::size_t col) {
    Matrix<T> m(a.rows() - 1, a.cols() - 1);
    for (std::size_t i = 0, r = 0; i < a.rows(); ++i) {
        if (i == row) continue;
        for (std::size_t j = 0, c = 0; j < a.cols(); ++j) {
            if (j == col) continue;
            m(r, c++) = a(i, j);
        }
        ++r;
    }
    return m;
}

template <class T>
T determinant(const Matrix<T>& a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) throw ArgumentError("determinant: matrix is not square");
    if (n == 1) return a(0, 0);
    if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    T acc = a(0, 0) * determinant(minor_of(a, 0, 0));
    for (std::size_t j = 1; j < n; ++j) {
        T term = a(0, j) * determinant(minor_of(a, 0, j));
        acc = (j % 2 == 0) ? acc + term : acc - term;
    }
    return acc;
}

/// Transpose of the cofactor matrix.
template <class T>
Matrix<T> adjugate(const Matrix<T>& a) {
    const std::size_t n = a.rows();
    Matrix<T> adj(n, n);
    if (n == 1) {
        adj(0, 0) = T(Number(1));
        return adj;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            T c = determinant(minor_of(a, i, j));
            adj(j, i) = ((i + j) % 2 == 0) ? c : T(Number(0)) - c;
        }
    return adj;
}

/// Symbolic inverse adj(A)/det(A).
inline ExprMatrix inverse_symbolic(const ExprMatrix& a) {
    Expr det = determinant(a);
    ExprMatrix adj = adjugate(a);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) adj(i, j) = adj(i, j) / det;
    return adj;
}

/// Exact inverse when the entries are rational; empty when singular.
inline std::optional<NumberMatrix> inverse_exact(const NumberMatrix& a) {
    Number det = determinant(a);
    if (det.is_zero()) return std::nullopt;
    NumberMatrix adj = adjugate(a);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) adj(i, j) = *divide(adj(i, j), det);
    return adj;
}

// ---- numeric linear algebra -------------------------------------------------

/// LU factorization with partial pivoting.
class LU {
  public:
    explicit LU(NumMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
        const std::size_t n = lu_.rows();
        if (n != lu_.cols()) throw ArgumentError("LU: matrix is not square");
        for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::fabs(lu_(i, k)) > std::fabs(lu_(p, k))) p = i;
            if (lu_(p, k) == 0.0) {
                singular_ = true;
                continue;
            }
            if (p != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
                std::swap(perm_[k], perm_[p]);
            }
            for (std::size_t i = k + 1; i < n; ++i) {
                lu_(i, k) /= lu_(k, k);
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= lu_(i, k) * lu_(k, j);
            }
        }
    }

    bool singular() const noexcept { return singular_; }

    Vector solve(const Vector& b) const {
        if (singular_) throw NumericalError("LU solve: matrix is singular");
        const std::size_t n = lu_.rows();
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[perm_[i]];
            for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
            x[i] = s / lu_(i, i);
        }
        return x;
    }

    NumMatrix inverse() const {
        const std::size_t n = lu_.rows();
        NumMatrix inv(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            Vector e(n, 0.0);
            e[j] = 1.0;
            Vector col = solve(e);
            for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        }
        return inv;
    }

  private:
    NumMatrix lu_;
    std::vector<std::size_t> perm_;
    bool singular_ = false;
};

inline double norm1(const NumMatrix& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += std::fabs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

/// True iff the symmetric matrix admits a Cholesky factorization (all eigenvalues > 0).
inline bool is_positive_definite(const NumMatrix& a) {
    const std::size_t n = a.rows();
    NumMatrix l(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) return false;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return true;
}

/// Lower Cholesky factor; throws NumericalError when not positive definite.
inline NumMatrix cholesky(const NumMatrix& a) {
    const std::size_t n = a.rows();
    NumMatrix l(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) throw NumericalError("cholesky: matrix is not positive definite");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

inline NumMatrix to_double(const NumberMatrix& a) {
    NumMatrix m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j).to_double();
    return m;
}

}  // namespace classb
