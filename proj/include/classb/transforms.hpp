#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "classb/calculus.hpp"
#include "classb/errors.hpp"
#include "classb/families.hpp"
#include "classb/matrix.hpp"

namespace classb {

/// Shortest decimal that round-trips `v`, read back as an exact rational when it fits.
inline Number number_from_double(double v) {
    if (!std::isfinite(v)) throw ArgumentError("non-finite matrix or vector entry");
    char buf[40];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    std::string text = buf;
    bool negative = !text.empty() && text[0] == '-';
    Number n = Number::from_decimal(negative ? text.substr(1) : text);
    return negative ? -n : n;
}

inline NumberMatrix to_number_matrix(const NumMatrix& a) {
    NumberMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = number_from_double(a(i, j));
    return out;
}

namespace detail {

inline Expr constant(const Number& v) { return Expr(v); }

inline NumberMatrix invert_checked(const NumberMatrix& a) {
    const std::size_t m = a.rows();
    if (m != a.cols()) throw ArgumentError("affine: A must be square");
    const NumMatrix ad = to_double(a);
    const double scale = std::pow(std::max(norm1(ad), 1e-300), static_cast<double>(m));
    const double det = determinant(ad);
    if (!(std::fabs(det) > 1e-12 * scale)) throw ArgumentError("affine: A is singular (|det A| <= 1e-12 * ||A||^m)");
    if (m <= 4) {
        if (auto inv = inverse_exact(a)) return *inv;
    }
    return to_number_matrix(LU(ad).inverse());
}

inline Interval interval_scale(const Interval& iv, double c) {
    if (c == 0.0) return {0.0, 0.0};
    double a = c * iv.lo;
    double b = c * iv.hi;
    return a <= b ? Interval{a, b} : Interval{b, a};
}

// Interval image of `box` (over `vars`) under y = A x + b.
inline Box image_box(const Box& box, const std::vector<std::string>& vars, const NumMatrix& a, const Vector& b) {
    Box out;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        Interval acc{b[i], b[i]};
        for (std::size_t j = 0; j < vars.size(); ++j) {
            if (a(i, j) == 0.0) continue;
            auto it = box.find(vars[j]);
            Interval src = it == box.end() ? Interval{-inf, inf} : it->second;
            Interval t = interval_scale(src, a(i, j));
            acc.lo += t.lo;
            acc.hi += t.hi;
        }
        if (std::isnan(acc.lo)) acc.lo = -inf;
        if (std::isnan(acc.hi)) acc.hi = inf;
        out[vars[i]] = acc;
    }
    return out;
}

// Image of a family under y = A x + b where the new law is that of the transformed
// sum of `power` independent copies:
//   V_new(y)    = A V(x) A^T / power
//   phi_new(z,y)= exp(-z . b) * phi(B z, x)^power
//   s_new(y)    = power * A^{-T} s(x)
// with x = A^{-1}(y - b) throughout.
inline FamilySpec linear_image(const FamilySpec& f, const NumberMatrix& a, const std::vector<Number>& b,
                               const NumberMatrix& zmap, std::int64_t power, const std::string& name) {
    const std::size_t m = f.dim;
    if (a.rows() != m || a.cols() != m) throw ArgumentError(name + ": A must be " + std::to_string(m) + "x" + std::to_string(m));
    if (b.size() != m) throw ArgumentError(name + ": b must have " + std::to_string(m) + " entries");
    const NumberMatrix ainv = invert_checked(a);
    const NumMatrix ad = to_double(a);
    Vector bd(m);
    for (std::size_t i = 0; i < m; ++i) bd[i] = b[i].to_double();

    // x_k in terms of y (the new mean variables reuse the old names).
    std::map<std::string, Expr> x_of_y;
    for (std::size_t k = 0; k < m; ++k) {
        Expr acc = Expr::num(0);
        for (std::size_t l = 0; l < m; ++l) {
            if (ainv(k, l).is_zero()) continue;
            acc = acc + constant(ainv(k, l)) * (Expr::var(f.mean_vars[l]) - constant(b[l]));
        }
        x_of_y[f.mean_vars[k]] = acc;
    }
    auto pull = [&](const Expr& e) { return substitute(e, x_of_y); };

    FamilySpec g = f;
    g.name = name;
    g.param_map.reset();
    g.note = f.note;

    const Expr inv_power = Expr(Number::rational(1, power));
    ExprMatrix vx(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) vx(i, j) = pull(f.variance(i, j));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            Expr acc = Expr::num(0);
            for (std::size_t k = 0; k < m; ++k) {
                if (a(i, k).is_zero()) continue;
                for (std::size_t l = 0; l < m; ++l) {
                    if (a(j, l).is_zero() || vx(k, l).is_zero()) continue;
                    acc = acc + constant(a(i, k) * a(j, l)) * vx(k, l);
                }
            }
            g.variance(i, j) = power == 1 ? acc : inv_power * acc;
        }

    if (f.laplace) {
        std::map<std::string, Expr> z_sub;
        const auto& zs = f.laplace->z_vars;
        for (std::size_t i = 0; i < m; ++i) {
            Expr acc = Expr::num(0);
            for (std::size_t j = 0; j < m; ++j)
                if (!zmap(i, j).is_zero()) acc = acc + constant(zmap(i, j)) * Expr::var(zs[j]);
            z_sub[zs[i]] = acc;
        }
        for (const auto& [k, v] : x_of_y) z_sub[k] = v;
        Expr phi = substitute(f.laplace->expr, z_sub);
        if (power != 1) phi = pow(phi, power);
        Expr shift = Expr::num(0);
        for (std::size_t i = 0; i < m; ++i)
            if (!b[i].is_zero()) shift = shift + constant(b[i]) * Expr::var(zs[i]);
        if (!shift.is_zero()) phi = exp(-shift) * phi;
        g.laplace = LaplaceTransform{phi, zs};
    }

    if (f.s_char) {
        std::vector<Expr> s(m);
        for (std::size_t i = 0; i < m; ++i) {
            Expr acc = Expr::num(0);
            for (std::size_t j = 0; j < m; ++j)
                if (!ainv(j, i).is_zero()) acc = acc + constant(ainv(j, i)) * pull((*f.s_char)[j]);
            s[i] = power == 1 ? acc : Expr::num(power) * acc;
        }
        g.s_char = s;
    }

    if (f.chart) {
        // Chart variables stay free; only the mean map and its inverse Jacobian change.
        Chart c = *f.chart;
        for (std::size_t i = 0; i < m; ++i) {
            Expr acc = constant(b[i]);
            for (std::size_t j = 0; j < m; ++j)
                if (!a(i, j).is_zero()) acc = acc + constant(a(i, j)) * f.chart->mean[j];
            c.mean[i] = acc;
        }
        const std::size_t cv = c.vars.size();
        for (std::size_t i = 0; i < cv; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                Expr acc = Expr::num(0);
                for (std::size_t k = 0; k < m; ++k)
                    if (!ainv(k, j).is_zero()) acc = acc + f.chart->dvar_dmean(i, k) * constant(ainv(k, j));
                c.dvar_dmean(i, j) = acc;
            }
        g.chart = std::move(c);
        g.domain.constraints.clear();
        for (const auto& con : f.domain.constraints) g.domain.constraints.push_back(pull(con));
    } else {
        g.domain.box = image_box(f.domain.box, f.mean_vars, ad, bd);
        g.domain.sampling = image_box(f.domain.sampling, f.mean_vars, ad, bd);
        g.grid_box = image_box(f.grid_box.empty() ? f.domain.sampling : f.grid_box, f.mean_vars, ad, bd);
        g.domain.constraints.clear();
        for (const auto& con : f.domain.constraints) g.domain.constraints.push_back(pull(con));
        // The original box, pulled back, keeps membership exact inside the over-approximated image box.
        for (std::size_t k = 0; k < m; ++k) {
            auto it = f.domain.box.find(f.mean_vars[k]);
            if (it == f.domain.box.end()) continue;
            const Expr& xk = x_of_y.at(f.mean_vars[k]);
            if (std::isfinite(it->second.lo)) g.domain.constraints.push_back(xk - Expr(number_from_double(it->second.lo)));
            if (std::isfinite(it->second.hi)) g.domain.constraints.push_back(Expr(number_from_double(it->second.hi)) - xk);
        }
        g.domain.approximate = true;
    }

    if (!f.reference_mean.empty()) {
        g.reference_mean.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = bd[i];
            for (std::size_t j = 0; j < m; ++j) acc += ad(i, j) * f.reference_mean[j];
            g.reference_mean[i] = acc;
        }
    }
    return g;
}

inline NumberMatrix scaled_identity(std::size_t m, const Number& c) {
    NumberMatrix out(m, m, Number(0));
    for (std::size_t i = 0; i < m; ++i) out(i, i) = c;
    return out;
}

}  // namespace detail

/// Law of A xi + b: mean A x + b, covariance A V(x) A^T, Laplace exp(-z.b) phi(A^T z, x).
inline FamilySpec affine(const FamilySpec& f, const NumberMatrix& a, const std::vector<Number>& b) {
    return detail::linear_image(f, a, b, a.transposed(), 1, "affine(" + f.name + ")");
}

inline FamilySpec affine(const FamilySpec& f, const NumMatrix& a, const Vector& b) {
    std::vector<Number> bn;
    for (double v : b) bn.push_back(number_from_double(v));
    return affine(f, to_number_matrix(a), bn);
}

/// Law of xi_1 + ... + xi_n for iid xi_k: mean n x, covariance n V(y/n), Laplace phi^n.
inline FamilySpec convolve_iid(const FamilySpec& f, std::int64_t n) {
    if (n < 1) throw ArgumentError("convolve_iid: n must be >= 1");
    const std::size_t m = f.dim;
    return detail::linear_image(f, detail::scaled_identity(m, Number(n)), std::vector<Number>(m, Number(0)),
                                detail::scaled_identity(m, Number(1)), n,
                                "convolve_iid(" + f.name + ", " + std::to_string(n) + ")");
}

/// Law of the mean of n iid copies: same mean, covariance V(x)/n, Laplace phi(z/n, x)^n.
inline FamilySpec sample_mean(const FamilySpec& f, std::int64_t n) {
    if (n < 1) throw ArgumentError("sample_mean: n must be >= 1");
    const std::size_t m = f.dim;
    return detail::linear_image(f, detail::scaled_identity(m, Number(1)), std::vector<Number>(m, Number(0)),
                                detail::scaled_identity(m, Number::rational(1, n)), n,
                                "sample_mean(" + f.name + ", " + std::to_string(n) + ")");
}

}  // namespace classb
