#pragma once

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "classb/errors.hpp"
#include "classb/expr.hpp"
#include "classb/rng.hpp"

namespace classb {

using Bindings = std::map<std::string, double>;

/// Evaluates expressions against fixed bindings. Node values are cached, so a batch
/// of expressions that share subtrees (a moment table) costs one pass over the DAG.
class Evaluator {
  public:
    explicit Evaluator(const Bindings& bindings) : bindings_(bindings) {}

    double operator()(const Expr& e) {
        switch (e.op()) {
            case Op::constant: return e.value().to_double();
            case Op::variable: {
                auto it = bindings_.find(e.name());
                if (it == bindings_.end())
                    throw EvalError(EvalError::Kind::unbound_variable, "unbound variable '" + e.name() + "'",
                                    e.name());
                return it->second;
            }
            default: break;
        }
        if (auto it = cache_.find(e.node()); it != cache_.end()) return it->second;
        double v = compute(e);
        cache_.emplace(e.node(), v);
        return v;
    }

  private:
    [[noreturn]] static void domain(const Expr& e, const std::string& why) {
        std::string s = short_string(e);
        throw EvalError(EvalError::Kind::domain, why + " in " + s, s);
    }

    double compute(const Expr& e) {
        double a = (*this)(e.lhs());
        double r = 0.0;
        switch (e.op()) {
            case Op::add: r = a + (*this)(e.rhs()); break;
            case Op::sub: r = a - (*this)(e.rhs()); break;
            case Op::mul: r = a * (*this)(e.rhs()); break;
            case Op::div: {
                double b = (*this)(e.rhs());
                if (b == 0.0) domain(e, "division by zero");
                r = a / b;
                break;
            }
            case Op::pow: {
                double b = (*this)(e.rhs());
                if (a < 0.0 && std::floor(b) != b) domain(e, "negative base with fractional exponent");
                if (a == 0.0 && b < 0.0) domain(e, "zero to a negative power");
                r = std::pow(a, b);
                break;
            }
            case Op::neg: r = -a; break;
            case Op::exp: r = std::exp(a); break;
            case Op::log:
                if (!(a > 0.0)) domain(e, "log of non-positive value");
                r = std::log(a);
                break;
            case Op::sqrt:
                if (a < 0.0) domain(e, "sqrt of negative value");
                r = std::sqrt(a);
                break;
            default: break;
        }
        if (std::isnan(r)) domain(e, "undefined result");
        return r;
    }

    const Bindings& bindings_;
    std::unordered_map<const Node*, double> cache_;
};

inline double eval(const Expr& e, const Bindings& bindings) { return Evaluator(bindings)(e); }

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Axis-aligned sampling region: variable name -> open interval.
using Box = std::map<std::string, Interval>;

inline constexpr std::uint64_t default_seed = 0x5eed'c1a5'5b00'0001ULL;

/// Deterministic interior points of `box` (the same seed gives the same points).
inline std::vector<Bindings> sample_box(const Box& box, std::size_t count, std::uint64_t seed = default_seed) {
    Xoshiro256 rng(seed);
    std::vector<Bindings> out;
    out.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        Bindings b;
        for (const auto& [name, iv] : box) b[name] = iv.lo + (iv.hi - iv.lo) * rng.uniform_open();
        out.push_back(std::move(b));
    }
    return out;
}

struct EquivReport {
    bool equivalent = true;
    std::size_t points_used = 0;
    std::size_t points_skipped = 0;
    double max_discrepancy = 0.0;  // max of |e1-e2| / (1+|e1|)
};

/// Probabilistic equality on explicit points: |e1 - e2| <= tol*(1+|e1|) wherever both
/// evaluate. Out-of-domain points are skipped; if none survive, throws NumericalError.
inline EquivReport equiv_report(const Expr& e1, const Expr& e2, const std::vector<Bindings>& points, double tol) {
    EquivReport rep;
    for (const auto& p : points) {
        double v1 = 0.0;
        double v2 = 0.0;
        try {
            v1 = eval(e1, p);
            v2 = eval(e2, p);
        } catch (const EvalError& err) {
            if (err.kind() == EvalError::Kind::unbound_variable) throw;
            ++rep.points_skipped;
            continue;
        }
        if (!std::isfinite(v1) || !std::isfinite(v2)) {
            ++rep.points_skipped;
            continue;
        }
        ++rep.points_used;
        double d = std::fabs(v1 - v2) / (1.0 + std::fabs(v1));
        rep.max_discrepancy = std::max(rep.max_discrepancy, d);
        if (d > tol) rep.equivalent = false;
    }
    if (rep.points_used == 0) throw NumericalError("equiv_numeric: every sampled point is out of domain");
    return rep;
}

inline bool equiv_numeric(const Expr& e1, const Expr& e2, const Box& domain, std::size_t trials, double tol,
                          std::uint64_t seed = default_seed) {
    if (trials == 0) throw ArgumentError("equiv_numeric: trials must be >= 1");
    for (const auto& [name, iv] : domain)
        if (!(iv.hi > iv.lo)) throw ArgumentError("equiv_numeric: degenerate range for '" + name + "'");
    return equiv_report(e1, e2, sample_box(domain, trials, seed), tol).equivalent;
}

inline bool equiv_numeric(const Expr& e1, const Expr& e2, const std::vector<Bindings>& points, double tol) {
    return equiv_report(e1, e2, points, tol).equivalent;
}

}  // namespace classb
