#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classb/calculus.hpp"
#include "classb/errors.hpp"
#include "classb/families.hpp"
#include "classb/matrix.hpp"
#include "classb/oracle.hpp"
#include "classb/quadrature.hpp"

namespace classb {

enum class Applicability { yes, no, unknown };

inline std::string to_string(Applicability a) {
    switch (a) {
        case Applicability::yes: return "yes";
        case Applicability::no: return "no";
        case Applicability::unknown: return "unknown";
    }
    return "unknown";
}

struct ExponentResult {
    double value = 0.0;
    double error = 0.0;
};

struct DualResult {
    double value = 0.0;
    double maximizer = 0.0;
};

struct TailReport {
    Vector x;
    Vector y;
    double exponent_A = 0.0;
    double bound = 1.0;
    double quadrature_error = 0.0;
    std::optional<double> dual_exponent;
    std::optional<double> dual_maximizer;
    std::optional<double> oracle_tail;
    Applicability applicable = Applicability::unknown;
    /// Diagnostics for optional fields that could not be filled.
    std::vector<std::string> notes;
};

namespace detail {

inline std::string format_vec(std::span<const double> v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + Number::real(v[i]).str();
    return s + ")";
}

}  // namespace detail

/// A(y) = (y-x) (int_0^1 (1-t) V^{-1}(x + t(y-x)) dt) (y-x)^T by 32-node Gauss-Legendre with
/// one bisection refinement; the error is the refinement delta.
inline ExponentResult exponent_A(const FamilySpec& f, std::span<const double> x, std::span<const double> y,
                                 std::size_t nodes = 32) {
    const std::size_t m = f.dim;
    if (x.size() != m || y.size() != m) throw ArgumentError("exponent_A: x and y must have " + std::to_string(m) + " coordinates");
    Vector d(m);
    bool same = true;
    for (std::size_t i = 0; i < m; ++i) {
        d[i] = y[i] - x[i];
        same = same && d[i] == 0.0;
    }
    if (same) return {};
    auto integrand = [&](double t) {
        Vector pt(m);
        for (std::size_t i = 0; i < m; ++i) pt[i] = x[i] + t * d[i];
        Bindings b;
        try {
            b = f.bind_mean(pt);
        } catch (const NumericalError&) {
            throw NumericalError("exponent_A: the segment from " + detail::format_vec(x) + " to " +
                                 detail::format_vec(y) + " leaves the family domain at t = " + Number::real(t).str());
        }
        LU lu(f.variance_at(b));
        if (lu.singular()) throw NumericalError("exponent_A: V is singular at " + detail::format_vec(pt));
        Vector w = lu.solve(d);
        double q = 0.0;
        for (std::size_t i = 0; i < m; ++i) q += d[i] * w[i];
        return (1.0 - t) * q;
    };
    QuadResult r = gauss_legendre_refined(integrand, 0.0, 1.0, nodes);
    return {r.value, r.error};
}

inline ExponentResult exponent_A(const FamilySpec& f, double x, double y) {
    return exponent_A(f, std::span<const double>(&x, 1), std::span<const double>(&y, 1));
}

/// sup_{a >= 0} [a y - ln phi(-a, x)], the Chernoff exponent (univariate).
inline DualResult dual_exponent(const FamilySpec& f, double x, double y) {
    if (!f.laplace) throw ArgumentError("dual_exponent: " + f.name + " has no Laplace transform");
    if (f.dim != 1) throw ArgumentError("dual_exponent: only univariate families are supported");
    const std::string& z = f.laplace->z_vars[0];
    const Expr& phi = f.laplace->expr;
    const Expr dphi = diff(phi, z);
    const Expr d2phi = diff(dphi, z);
    const Bindings base = f.bind_mean({x});

    struct Local {
        double beta;
        double slope;
        double curvature;
    };
    // Empty when phi(-a, x) is undefined or non-positive (outside the strip of convergence).
    auto at = [&](double a) -> std::optional<Local> {
        Bindings b = base;
        b[z] = -a;
        try {
            Evaluator ev(b);
            const double p0 = ev(phi);
            const double p1 = ev(dphi);
            const double p2 = ev(d2phi);
            if (!(p0 > 0.0) || !std::isfinite(p0) || !std::isfinite(p1) || !std::isfinite(p2)) return std::nullopt;
            // d/da ln phi(-a) = -phi'/phi, d2/da2 = phi''/phi - (phi'/phi)^2.
            const double g1 = p1 / p0;
            return Local{a * y - std::log(p0), y + g1, -(p2 / p0 - g1 * g1)};
        } catch (const EvalError&) {
            return std::nullopt;
        }
    };

    auto start = at(0.0);
    if (!start) throw NumericalError("dual_exponent: phi(0, x) is not finite");
    if (start->slope <= 0.0) return {0.0, 0.0};

    // Bracket the maximizer of the concave function beta by stepping out until the slope
    // turns negative; at the edge of the strip, bisect back toward the last valid point.
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.25;
    bool bracketed = false;
    for (int it = 0; it < 200 && !bracketed; ++it) {
        const double cand = hi + step;
        auto v = at(cand);
        if (!v) {
            step *= 0.5;
            if (step < 1e-14 * std::max(1.0, hi)) break;
            continue;
        }
        if (v->slope <= 0.0) {
            lo = hi;
            hi = cand;
            bracketed = true;
        } else {
            hi = cand;
            step *= 2.0;
            if (hi > 1e6) break;
        }
    }
    if (!bracketed)
        throw NumericalError("dual_exponent: the maximizer of beta(a) could not be bracketed for y = " +
                             Number::real(y).str());

    // Golden-section on beta, then Newton polish on the slope.
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo;
    double b = hi;
    double c = b - golden * (b - a);
    double dd = a + golden * (b - a);
    double fc = at(c)->beta;
    double fd = at(dd)->beta;
    while (b - a > 1e-8 * std::max(1.0, b)) {
        if (fc > fd) {
            b = dd;
            dd = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = at(c)->beta;
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + golden * (b - a);
            fd = at(dd)->beta;
        }
    }
    double star = 0.5 * (a + b);
    for (int it = 0; it < 50; ++it) {
        auto v = at(star);
        if (!v || !(v->curvature < 0.0)) break;
        const double next = star - v->slope / v->curvature;
        if (!(next >= lo && next <= hi)) break;
        const double move = std::fabs(next - star);
        star = next;
        if (move <= 1e-14 * std::max(1.0, star)) break;
    }
    auto best = at(star);
    return {best->beta, star};
}

/// Whether Q(x){t >= y} is covered: s(x) >= s(y) coordinatewise.
inline Applicability tail_applicability(const FamilySpec& f, std::span<const double> x, std::span<const double> y) {
    if (f.dim == 1) return y[0] >= x[0] ? Applicability::yes : Applicability::no;
    if (!f.s_char) return Applicability::unknown;
    try {
        const Bindings bx = f.bind_mean(x);
        const Bindings by = f.bind_mean(y);
        for (const Expr& s : *f.s_char)
            if (eval(s, bx) < eval(s, by)) return Applicability::no;
        return Applicability::yes;
    } catch (const Error&) {
        return Applicability::unknown;
    }
}

/// Full report: exponent, bound exp(-A), dual route and exact tail where available.
inline TailReport tail_bound(const FamilySpec& f, std::span<const double> x, std::span<const double> y) {
    TailReport rep;
    rep.x.assign(x.begin(), x.end());
    rep.y.assign(y.begin(), y.end());
    ExponentResult A = exponent_A(f, x, y);
    rep.exponent_A = A.value;
    rep.quadrature_error = A.error;
    rep.bound = std::exp(-A.value);
    rep.applicable = tail_applicability(f, x, y);
    if (rep.applicable == Applicability::unknown)
        rep.notes.push_back("applicability unknown: no characteristic s(x) to compare x and y");
    if (f.laplace && f.dim == 1) {
        try {
            DualResult d = dual_exponent(f, x[0], y[0]);
            rep.dual_exponent = d.value;
            rep.dual_maximizer = d.maximizer;
        } catch (const Error& e) {
            rep.notes.push_back(std::string("dual exponent unavailable: ") + e.what());
        }
    }
    if (f.param_map && f.dim == 1) {
        try {
            const auto params = oracle::params_at_mean(f.param_map->family, f.param_map->params, x);
            rep.oracle_tail = oracle::exact_tail(f.param_map->family, params, y[0]);
        } catch (const Error& e) {
            rep.notes.push_back(std::string("exact tail unavailable: ") + e.what());
        }
    }
    return rep;
}

inline TailReport tail_bound(const FamilySpec& f, double x, double y) {
    return tail_bound(f, std::span<const double>(&x, 1), std::span<const double>(&y, 1));
}

}  // namespace classb
