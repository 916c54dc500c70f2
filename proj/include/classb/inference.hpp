#pragma once

#include <cmath>
#include <span>
#include <string>

#include "classb/errors.hpp"
#include "classb/families.hpp"
#include "classb/matrix.hpp"

namespace classb {

struct FisherResult {
    NumMatrix info;
    /// 1-norm condition number of V(x).
    double condition = 0.0;
};

/// I(x) = V(x)^{-1}, by LU with partial pivoting.
inline FisherResult fisher_info_report(const FamilySpec& f, std::span<const double> x) {
    const Bindings b = f.bind_mean(x);
    const NumMatrix v = f.variance_at(b);
    for (std::size_t i = 0; i < f.dim; ++i)
        for (std::size_t j = 0; j < f.dim; ++j)
            if (!std::isfinite(v(i, j))) throw NumericalError(f.name + ": V is not finite at " + describe_point(b));
    LU lu(v);
    if (lu.singular()) throw NumericalError(f.name + ": V is singular at " + describe_point(b));
    FisherResult r;
    r.info = lu.inverse();
    r.condition = norm1(v) * norm1(r.info);
    if (!(r.condition <= 1e12))
        throw NumericalError(f.name + ": V is ill-conditioned at " + describe_point(b) +
                             " (condition number " + Number::real(r.condition).str() + ")");
    // Symmetrize the round-off.
    for (std::size_t i = 0; i < f.dim; ++i)
        for (std::size_t j = i + 1; j < f.dim; ++j) r.info(i, j) = r.info(j, i) = 0.5 * (r.info(i, j) + r.info(j, i));
    return r;
}

inline NumMatrix fisher_info(const FamilySpec& f, std::span<const double> x) { return fisher_info_report(f, x).info; }

inline NumMatrix fisher_info(const FamilySpec& f, std::initializer_list<double> x) {
    std::vector<double> v(x);
    return fisher_info(f, std::span<const double>(v));
}

/// adj(V)/det(V) as expressions; limited to m <= 3.
inline ExprMatrix fisher_info_symbolic(const FamilySpec& f) {
    if (f.dim > 3) throw ArgumentError("fisher_info_symbolic: dimension " + std::to_string(f.dim) + " > 3");
    if (f.dim == 1) {
        ExprMatrix out(1, 1);
        out(0, 0) = Expr::num(1) / f.variance(0, 0);
        return out;
    }
    return inverse_symbolic(f.variance);
}

}  // namespace classb
