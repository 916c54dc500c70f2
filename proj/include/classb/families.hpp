#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classb/calculus.hpp"
#include "classb/errors.hpp"
#include "classb/eval.hpp"
#include "classb/expr.hpp"
#include "classb/matrix.hpp"
#include "classb/parser.hpp"
#include "classb/quadrature.hpp"

namespace classb {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Where a family lives. `box` holds the true open ranges of the free coordinates (the
/// mean variables, or the chart variables when the family has a chart) and may be
/// unbounded; `sampling` is a finite sub-box used for seeded checks. Each constraint
/// must evaluate strictly positive.
struct Domain {
    Box box;
    Box sampling;
    std::vector<Expr> constraints;
    /// Set when the box is an over-approximation (images under affine maps).
    bool approximate = false;
};

/// phi(z, x) = E exp(-z . xi) as an expression in the z variables and the mean variables.
struct LaplaceTransform {
    Expr expr;
    std::vector<std::string> z_vars;
};

/// Mean coordinates written as functions of auxiliary chart variables, for families whose
/// variance function is only available through another parametrization (logarithmic).
/// The chart variables then depend on x through the inverse Jacobian.
struct Chart {
    std::vector<std::string> vars;
    std::vector<Expr> mean;
    ExprMatrix dvar_dmean;  // (i, j) = d vars[i] / d x_j
};

/// Underlying parameters of a built-in family, consumed by the oracle.
struct ParamMap {
    std::string family;
    std::map<std::string, double> params;
};

struct FamilySpec {
    std::string name;
    std::size_t dim = 1;
    std::vector<std::string> mean_vars;
    ExprMatrix variance;
    Domain domain;
    std::optional<LaplaceTransform> laplace;
    std::optional<std::vector<Expr>> s_char;
    /// Auxiliary symbols held fixed (n, sigma2, lambda, ...).
    Bindings constants;
    std::optional<Chart> chart;
    std::optional<ParamMap> param_map;
    /// Mean at the construction parameters; empty for user-defined families.
    Vector reference_mean;
    /// Box (over the free coordinates) on which phi is finite for |z| <= 1/2.
    Box grid_box;
    /// False when the descriptor could not be cross-checked (printed forms that are
    /// internally inconsistent); such families skip the symmetry/PD validation.
    bool verified = true;
    std::string note;

    /// The free coordinates that `domain.box` ranges over.
    std::vector<std::string> free_vars() const { return chart ? chart->vars : mean_vars; }

    /// Total derivative d e / d x_j, routing chart variables through the inverse Jacobian.
    Expr d_dmean(const Expr& e, std::size_t j) const {
        Expr d = diff(e, mean_vars[j]);
        if (chart) {
            for (std::size_t i = 0; i < chart->vars.size(); ++i) {
                Expr de = diff(e, chart->vars[i]);
                if (!de.is_zero()) d = d + de * chart->dvar_dmean(i, j);
            }
        }
        return d;
    }

    bool contains(const Bindings& b) const {
        for (const auto& [name, iv] : domain.box) {
            auto it = b.find(name);
            if (it == b.end() || !(it->second > iv.lo && it->second < iv.hi)) return false;
        }
        for (const auto& c : domain.constraints) {
            try {
                if (!(eval(c, b) > 0.0)) return false;
            } catch (const EvalError&) {
                return false;
            }
        }
        return true;
    }

    /// Constants plus free coordinates, completed with the mean variables for charted
    /// families. Returns empty if the point is outside the domain.
    std::optional<Bindings> complete(Bindings b) const {
        for (const auto& [k, v] : constants) b.emplace(k, v);
        if (chart) {
            try {
                Evaluator ev(b);
                std::vector<double> xs;
                for (const auto& m : chart->mean) xs.push_back(ev(m));
                for (std::size_t i = 0; i < dim; ++i) b[mean_vars[i]] = xs[i];
            } catch (const EvalError&) {
                return std::nullopt;
            }
        }
        if (!contains(b)) return std::nullopt;
        return b;
    }

    /// Full bindings for the mean `x`; charted families solve x(theta) = x by damped Newton.
    Bindings bind_mean(std::span<const double> x) const {
        if (x.size() != dim) throw ArgumentError(name + ": mean has " + std::to_string(x.size()) +
                                                 " coordinates, family dimension is " + std::to_string(dim));
        Bindings b = constants;
        for (std::size_t i = 0; i < dim; ++i) b[mean_vars[i]] = x[i];
        if (chart) b = solve_chart(x);
        if (!contains(b)) throw NumericalError(name + ": mean " + format_point(x) + " is outside the family domain");
        return b;
    }

    Bindings bind_mean(std::initializer_list<double> x) const {
        std::vector<double> v(x);
        return bind_mean(std::span<const double>(v));
    }

    Vector mean_at(const Bindings& b) const {
        Vector x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = b.at(mean_vars[i]);
        return x;
    }

    NumMatrix variance_at(const Bindings& b) const {
        Evaluator ev(b);
        NumMatrix v(dim, dim);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) v(i, j) = ev(variance(i, j));
        return v;
    }

    /// Seeded in-domain points drawn from the sampling box.
    std::vector<Bindings> sample_points(std::size_t count, std::uint64_t seed = default_seed) const {
        std::vector<Bindings> out;
        Xoshiro256 rng(seed);
        const std::size_t max_attempts = 200 * count + 100;
        for (std::size_t attempt = 0; attempt < max_attempts && out.size() < count; ++attempt) {
            Bindings b;
            for (const auto& [name, iv] : domain.sampling) b[name] = iv.lo + (iv.hi - iv.lo) * rng.uniform_open();
            auto full = complete(std::move(b));
            if (!full) continue;
            try {
                NumMatrix v = variance_at(*full);
                bool finite = true;
                for (std::size_t i = 0; i < dim; ++i)
                    for (std::size_t j = 0; j < dim; ++j) finite = finite && std::isfinite(v(i, j));
                if (!finite) continue;
            } catch (const EvalError&) {
                continue;
            }
            out.push_back(std::move(*full));
        }
        if (out.empty()) throw NumericalError(name + ": no in-domain sample points in the sampling box");
        return out;
    }

    /// Identity used for memoization: name, variance entries and constants.
    std::string fingerprint() const {
        std::string s = name + "|";
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) s += to_string(variance(i, j)) + ";";
        for (const auto& [k, v] : constants) s += k + "=" + Number::real(v).str() + ",";
        if (chart)
            for (const auto& m : chart->mean) s += to_string(m) + ";";
        return s;
    }

  private:
    static std::string format_point(std::span<const double> x) {
        std::string s = "(";
        for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + Number::real(x[i]).str();
        return s + ")";
    }

    Bindings solve_chart(std::span<const double> target) const {
        const std::size_t m = chart->vars.size();
        ExprMatrix jac(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) jac(i, j) = diff(chart->mean[i], chart->vars[j]);

        auto residual = [&](const Bindings& b, Vector& r) -> bool {
            try {
                Evaluator ev(b);
                r.assign(m, 0.0);
                for (std::size_t i = 0; i < m; ++i) r[i] = ev(chart->mean[i]) - target[i];
            } catch (const EvalError&) {
                return false;
            }
            for (double v : r)
                if (!std::isfinite(v)) return false;
            return true;
        };
        auto inside = [&](const Bindings& b) {
            for (const auto& [name, iv] : domain.box) {
                auto it = b.find(name);
                if (it != b.end() && !(it->second > iv.lo && it->second < iv.hi)) return false;
            }
            return true;
        };
        // Rounding near a parameter boundary can fake a root (e.g. log(1 - t) for t near 0).
        auto clear_of_boundary = [&](const Bindings& b) {
            for (const auto& [name, iv] : domain.box) {
                auto it = b.find(name);
                if (it == b.end()) continue;
                const double margin = 1e-9 * std::max({1.0, std::fabs(iv.lo), std::fabs(iv.hi)});
                if (std::isfinite(iv.lo) && it->second - iv.lo < margin) return false;
                if (std::isfinite(iv.hi) && iv.hi - it->second < margin) return false;
            }
            return true;
        };
        double scale = 1.0;
        for (double t : target) scale = std::max(scale, std::fabs(t));

        Xoshiro256 rng(default_seed);
        for (int start = 0; start < 16; ++start) {
            Bindings b = constants;
            for (const auto& [name, iv] : domain.sampling)
                b[name] = start == 0 ? 0.5 * (iv.lo + iv.hi) : iv.lo + (iv.hi - iv.lo) * rng.uniform_open();
            Vector r;
            if (!residual(b, r)) continue;
            for (int iter = 0; iter < 200; ++iter) {
                double norm = 0.0;
                for (double v : r) norm = std::max(norm, std::fabs(v));
                if (norm <= 1e-14 * scale) {
                    if (!clear_of_boundary(b)) break;
                    for (std::size_t i = 0; i < dim; ++i) b[mean_vars[i]] = target[i];
                    return b;
                }
                NumMatrix jv(m, m);
                try {
                    Evaluator ev(b);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < m; ++j) jv(i, j) = ev(jac(i, j));
                } catch (const EvalError&) {
                    break;
                }
                LU lu(jv);
                if (lu.singular()) break;
                Vector step = lu.solve(r);
                double damp = 1.0;
                bool moved = false;
                for (int h = 0; h < 60; ++h, damp *= 0.5) {
                    Bindings trial = b;
                    for (std::size_t i = 0; i < m; ++i) trial[chart->vars[i]] -= damp * step[i];
                    Vector rt;
                    if (!inside(trial) || !residual(trial, rt)) continue;
                    double nt = 0.0;
                    for (double v : rt) nt = std::max(nt, std::fabs(v));
                    if (nt < norm || nt <= 1e-14 * scale) {
                        b = std::move(trial);
                        r = std::move(rt);
                        moved = true;
                        break;
                    }
                }
                if (!moved) break;
            }
        }
        throw NumericalError(name + ": could not solve the chart for mean " + format_point(target));
    }
};

// ---- construction -----------------------------------------------------------

namespace detail {

inline std::string indexed(const std::string& base, std::size_t i, std::size_t dim) {
    return dim == 1 ? base : base + std::to_string(i + 1);
}

inline std::vector<std::string> names(const std::string& base, std::size_t dim) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < dim; ++i) out.push_back(indexed(base, i, dim));
    return out;
}

inline Expr p(const std::string& text) { return parse(text); }

inline std::string sum_of(const std::vector<std::string>& terms) {
    std::string s = "(";
    for (std::size_t i = 0; i < terms.size(); ++i) s += (i ? " + " : "") + terms[i];
    return s + ")";
}

inline double require(const std::map<std::string, double>& params, const std::string& family, const std::string& key) {
    auto it = params.find(key);
    if (it == params.end()) throw ArgumentError(family + ": missing parameter '" + key + "'");
    return it->second;
}

inline void check(bool ok, const std::string& family, const std::string& what) {
    if (!ok) throw ArgumentError(family + ": parameter out of range (" + what + ")");
}

inline bool positive_integer(double v) { return v >= 1.0 && std::floor(v) == v && v < 1e9; }

/// Values of `base1, base2, ...` in order; empty if `base1` is absent.
inline std::vector<double> indexed_params(const std::map<std::string, double>& params, const std::string& base) {
    std::vector<double> out;
    for (std::size_t i = 1;; ++i) {
        auto it = params.find(base + std::to_string(i));
        if (it == params.end()) break;
        out.push_back(it->second);
    }
    return out;
}

inline void reject_unknown(const std::map<std::string, double>& params, const std::string& family,
                           const std::function<bool(const std::string&)>& known) {
    for (const auto& [k, v] : params)
        if (!known(k)) throw ArgumentError(family + ": unknown parameter '" + k + "'");
}

inline bool has_indexed_prefix(const std::string& key, const std::string& base) {
    if (key.size() <= base.size() || key.compare(0, base.size(), base) != 0) return false;
    return std::all_of(key.begin() + static_cast<std::ptrdiff_t>(base.size()), key.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
}

inline FamilySpec skeleton(const std::string& name, std::size_t dim, const std::map<std::string, double>& params) {
    FamilySpec f;
    f.name = name;
    f.dim = dim;
    f.mean_vars = names("x", dim);
    f.variance = ExprMatrix(dim, dim);
    f.param_map = ParamMap{name, params};
    return f;
}

inline void set_chart_inverse(Chart& chart) {
    const std::size_t m = chart.vars.size();
    ExprMatrix jac(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) jac(i, j) = diff(chart.mean[i], chart.vars[j]);
    chart.dvar_dmean = inverse_symbolic(jac);
}

inline Interval positive_range(double center) { return {0.1 * std::min(center, 1.0), std::max(10.0, 3.0 * center)}; }

}  // namespace detail

/// Names accepted by builtin().
inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {
        "binomial", "poisson",      "negative_binomial",   "normal",      "gamma",       "mvnormal",
        "multinomial", "negative_multinomial", "logarithmic", "mv_logarithmic", "random_walk", "borel_tanner"};
    return names;
}

/// Built-in class-B family in its mean parametrization. Multivariate variants take
/// indexed parameters (p1, p2, ...; theta1, ...; alpha1, ...).
inline FamilySpec builtin(const std::string& name, const std::map<std::string, double>& params) {
    using detail::check;
    using detail::p;
    using detail::require;
    auto only = [&](std::initializer_list<const char*> keys) {
        detail::reject_unknown(params, name, [&](const std::string& k) {
            return std::any_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; });
        });
    };

    if (name == "binomial") {
        only({"n", "p"});
        double n = require(params, name, "n");
        double pr = require(params, name, "p");
        check(detail::positive_integer(n), name, "n must be a positive integer");
        check(pr > 0 && pr < 1, name, "0 < p < 1");
        FamilySpec f = detail::skeleton(name, 1, params);
        f.constants = {{"n", n}};
        f.variance(0, 0) = p("x*(1 - x/n)");
        f.laplace = LaplaceTransform{p("(1 - x/n + x/n*exp(-z))^n"), {"z"}};
        f.s_char = std::vector<Expr>{p("-log(x/(n - x))")};
        f.domain.box = {{"x", {0.0, n}}};
        f.domain.sampling = {{"x", {0.05 * n, 0.95 * n}}};
        f.reference_mean = {n * pr};
        f.grid_box = {{"x", {0.1 * n, 0.9 * n}}};
        return f;
    }
    if (name == "poisson") {
        only({"lambda"});
        double lambda = require(params, name, "lambda");
        check(lambda > 0, name, "lambda > 0");
        FamilySpec f = detail::skeleton(name, 1, params);
        f.variance(0, 0) = p("x");
        f.laplace = LaplaceTransform{p("exp(x*(exp(-z) - 1))"), {"z"}};
        f.s_char = std::vector<Expr>{p("-log(x)")};
        f.domain.box = {{"x", {0.0, inf}}};
        f.domain.sampling = {{"x", detail::positive_range(lambda)}};
        f.reference_mean = {lambda};
        f.grid_box = {{"x", {0.5, 4.0}}};
        return f;
    }
    if (name == "negative_binomial") {
        only({"n", "p"});
        double n = require(params, name, "n");
        double pr = require(params, name, "p");
        check(n > 0, name, "n > 0");
        check(pr > 0 && pr < 1, name, "0 < p < 1");
        FamilySpec f = detail::skeleton(name, 1, params);
        f.constants = {{"n", n}};
        double x0 = n * (1 - pr) / pr;
        f.variance(0, 0) = p("x*(1 + x/n)");
        f.laplace = LaplaceTransform{p("exp(-n*log(1 + x/n*(1 - exp(-z))))"), {"z"}};
        f.s_char = std::vector<Expr>{p("-log(x/(n + x))")};
        f.domain.box = {{"x", {0.0, inf}}};
        f.domain.sampling = {{"x", detail::positive_range(x0)}};
        f.reference_mean = {x0};
        f.grid_box = {{"x", {0.1 * n, 1.2 * n}}};
        return f;
    }
    if (name == "normal") {
        only({"alpha", "sigma2"});
        double alpha = require(params, name, "alpha");
        double s2 = require(params, name, "sigma2");
        check(s2 > 0, name, "sigma2 > 0");
        FamilySpec f = detail::skeleton(name, 1, params);
        f.constants = {{"sigma2", s2}};
        f.variance(0, 0) = p("sigma2");
        f.laplace = LaplaceTransform{p("exp(-z*x + z^2*sigma2/2)"), {"z"}};
        f.s_char = std::vector<Expr>{p("-x/sigma2")};
        f.domain.box = {{"x", {-inf, inf}}};
        f.domain.sampling = {{"x", {alpha - 5.0, alpha + 5.0}}};
        f.reference_mean = {alpha};
        f.grid_box = {{"x", {alpha - 2.0, alpha + 2.0}}};
        return f;
    }
    if (name == "gamma") {
        only({"alpha", "lambda"});
        double rate = require(params, name, "alpha");
        double shape = require(params, name, "lambda");
        check(rate > 0, name, "alpha > 0");
        check(shape > 0, name, "lambda > 0");
        FamilySpec f = detail::skeleton(name, 1, params);
        f.constants = {{"lambda", shape}};
        double x0 = shape / rate;
        f.variance(0, 0) = p("x^2/lambda");
        f.laplace = LaplaceTransform{p("exp(-lambda*log(1 + z*x/lambda))"), {"z"}};
        f.s_char = std::vector<Expr>{p("lambda/x")};
        f.domain.box = {{"x", {0.0, inf}}};
        f.domain.sampling = {{"x", {0.1 * x0, 5.0 * x0}}};
        f.reference_mean = {x0};
        f.grid_box = {{"x", {0.1 * shape, 1.5 * shape}}};
        return f;
    }
    if (name == "mvnormal") {
        std::vector<double> alpha = detail::indexed_params(params, "alpha");
        const std::size_t m = alpha.size();
        check(m >= 1 && m <= 9, name, "alpha1..alpham with 1 <= m <= 9");
        detail::reject_unknown(params, name, [&](const std::string& k) {
            if (detail::has_indexed_prefix(k, "alpha")) return true;
            if (detail::has_indexed_prefix(k, "sigma") && k.size() == 7) {
                std::size_t i = static_cast<std::size_t>(k[5] - '0');
                std::size_t j = static_cast<std::size_t>(k[6] - '0');
                return i >= 1 && j >= i && j <= m;
            }
            return false;
        });
        FamilySpec f = detail::skeleton(name, m, params);
        NumMatrix cov(m, m);
        std::string quad;
        std::string lin;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i; j < m; ++j) {
                std::string key = "sigma" + std::to_string(i + 1) + std::to_string(j + 1);
                double v = i == j ? require(params, name, key) : (params.count(key) ? params.at(key) : 0.0);
                cov(i, j) = cov(j, i) = v;
                f.constants[key] = v;
                f.variance(i, j) = f.variance(j, i) = Expr::var(key);
            }
        }
        check(is_positive_definite(cov), name, "covariance must be positive definite");
        std::vector<std::string> lin_terms;
        std::vector<std::string> quad_terms;
        for (std::size_t i = 0; i < m; ++i) {
            std::string zi = "z" + std::to_string(i + 1);
            lin_terms.push_back(zi + "*x" + std::to_string(i + 1));
            for (std::size_t j = 0; j < m; ++j) {
                std::string zj = "z" + std::to_string(j + 1);
                std::string key = "sigma" + std::to_string(std::min(i, j) + 1) + std::to_string(std::max(i, j) + 1);
                quad_terms.push_back(zi + "*" + zj + "*" + key);
            }
        }
        f.laplace = LaplaceTransform{
            p("exp(-" + detail::sum_of(lin_terms) + " + " + detail::sum_of(quad_terms) + "/2)"), detail::names("z", m)};
        if (m <= 3) {
            ExprMatrix prec = inverse_symbolic(f.variance);
            std::vector<Expr> s(m);
            for (std::size_t i = 0; i < m; ++i) {
                Expr acc = Expr::num(0);
                for (std::size_t j = 0; j < m; ++j) acc = acc + prec(i, j) * Expr::var(f.mean_vars[j]);
                s[i] = -acc;
            }
            f.s_char = s;
        }
        for (std::size_t i = 0; i < m; ++i) {
            f.domain.box[f.mean_vars[i]] = {-inf, inf};
            f.domain.sampling[f.mean_vars[i]] = {alpha[i] - 5.0, alpha[i] + 5.0};
            f.grid_box[f.mean_vars[i]] = {alpha[i] - 2.0, alpha[i] + 2.0};
        }
        f.reference_mean = alpha;
        return f;
    }
    if (name == "multinomial" || name == "negative_multinomial") {
        const bool negative = name == "negative_multinomial";
        std::vector<double> probs = detail::indexed_params(params, "p");
        const std::size_t m = probs.size();
        detail::reject_unknown(params, name, [&](const std::string& k) {
            return k == "n" || detail::has_indexed_prefix(k, "p");
        });
        double n = require(params, name, "n");
        check(m >= 1, name, "at least p1 is required");
        check(negative ? n > 0 : detail::positive_integer(n), name,
              negative ? "n > 0" : "n must be a positive integer");
        double total = 0.0;
        for (double v : probs) {
            check(v > 0 && (negative || v < 1), name, negative ? "p_i > 0" : "0 < p_i < 1");
            total += v;
        }
        if (!negative) check(total < 1, name, "p1 + ... + pm < 1");
        FamilySpec f = detail::skeleton(name, m, params);
        f.constants = {{"n", n}};
        const std::string sign = negative ? " + " : " - ";
        std::vector<std::string> xs = f.mean_vars;
        std::vector<std::string> lap_terms;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j)
                    f.variance(i, j) = p(xs[i] + "*(1" + sign + xs[i] + "/n)");
                else
                    f.variance(i, j) = p((negative ? "" : "-") + xs[i] + "*" + xs[j] + "/n");
            }
            std::string zi = detail::indexed("z", i, m);
            lap_terms.push_back(negative ? xs[i] + "/n*(1 - exp(-" + zi + "))" : xs[i] + "/n*(exp(-" + zi + ") - 1)");
        }
        // Negative powers converge only where the base is positive; the log form enforces that.
        const std::string base = "(1 + " + detail::sum_of(lap_terms) + ")";
        f.laplace = LaplaceTransform{p(negative ? "exp(-n*log" + base + ")" : base + "^n"), detail::names("z", m)};
        std::string xsum = detail::sum_of(xs);
        std::vector<Expr> s(m);
        for (std::size_t i = 0; i < m; ++i)
            s[i] = p("-log(" + xs[i] + "/(n" + (negative ? " + " : " - ") + xsum + "))");
        f.s_char = s;
        if (!negative) f.domain.constraints.push_back(p("n - " + xsum));
        for (std::size_t i = 0; i < m; ++i) {
            double x0 = n * probs[i];
            f.reference_mean.push_back(x0);
            if (negative) {
                f.domain.box[xs[i]] = {0.0, inf};
                f.domain.sampling[xs[i]] = detail::positive_range(x0);
                f.grid_box[xs[i]] = {0.1 * n, 0.5 * n};
            } else {
                f.domain.box[xs[i]] = {0.0, n};
                f.domain.sampling[xs[i]] = {0.0, n};
                f.grid_box[xs[i]] = {0.1 * n / static_cast<double>(m), 0.8 * n / static_cast<double>(m)};
            }
        }
        return f;
    }
    if (name == "logarithmic" || name == "mv_logarithmic") {
        const bool multi = name == "mv_logarithmic";
        std::vector<double> theta = multi ? detail::indexed_params(params, "theta")
                                          : std::vector<double>{require(params, name, "theta")};
        const std::size_t m = theta.size();
        detail::reject_unknown(params, name, [&](const std::string& k) {
            return multi ? detail::has_indexed_prefix(k, "theta") : k == "theta";
        });
        check(m >= 1, name, "theta1 is required");
        double total = 0.0;
        for (double t : theta) {
            check(t > 0 && t < 1, name, "0 < theta_i < 1");
            total += t;
        }
        check(total < 1, name, "theta1 + ... + thetam < 1");
        FamilySpec f = detail::skeleton(name, m, params);
        Chart chart;
        chart.vars = multi ? detail::names("theta", m) : std::vector<std::string>{"theta"};
        const std::string T = multi ? detail::sum_of(chart.vars) : "theta";
        const std::string L = "log(1 - " + T + ")";
        for (std::size_t i = 0; i < m; ++i)
            chart.mean.push_back(p("-" + chart.vars[i] + "/((1 - " + T + ")*" + L + ")"));
        detail::set_chart_inverse(chart);
        if (!multi) {
            f.variance(0, 0) = p("-theta/((1 - theta)^2*log(1 - theta))*(1 + theta/log(1 - theta))");
        } else {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    std::string delta = i == j ? "1" : "0";
                    f.variance(i, j) = p("-" + chart.vars[i] + "/((1 - " + T + ")*" + L + ")*(" + delta + " + " +
                                         chart.vars[j] + "*(1 + " + L + ")/((1 - " + T + ")*" + L + "))");
                }
        }
        std::vector<std::string> lap_terms;
        for (std::size_t i = 0; i < m; ++i)
            lap_terms.push_back(chart.vars[i] + "*exp(-" + detail::indexed("z", i, m) + ")");
        f.laplace = LaplaceTransform{p("log(1 - " + detail::sum_of(lap_terms) + ")/" + L), detail::names("z", m)};
        std::vector<Expr> s;
        for (const auto& v : chart.vars) s.push_back(p("-log(" + v + ")"));
        f.s_char = s;
        for (std::size_t i = 0; i < m; ++i) {
            f.domain.box[chart.vars[i]] = {0.0, 1.0};
            f.domain.sampling[chart.vars[i]] = {0.02, multi ? 0.9 / static_cast<double>(m) : 0.95};
            f.grid_box[chart.vars[i]] = {0.05, multi ? 0.5 / static_cast<double>(m) : 0.55};
        }
        if (multi) f.domain.constraints.push_back(p("1 - " + T));
        double L0 = std::log(1 - total);
        for (std::size_t i = 0; i < m; ++i) f.reference_mean.push_back(-theta[i] / ((1 - total) * L0));
        f.chart = std::move(chart);
        return f;
    }
    if (name == "random_walk" || name == "borel_tanner") {
        const bool walk = name == "random_walk";
        const std::string key = walk ? "p" : "alpha";
        std::vector<double> multi = detail::indexed_params(params, key);
        detail::reject_unknown(params, name, [&](const std::string& k) {
            return k == "n" || k == key || detail::has_indexed_prefix(k, key);
        });
        double n = require(params, name, "n");
        check(detail::positive_integer(n), name, "n must be a positive integer");
        if (multi.empty()) {
            double q = require(params, name, key);
            if (walk)
                check(q > 0.5 && q < 1, name, "1/2 < p < 1");
            else
                check(q > 0 && q < 1, name, "0 < alpha < 1");
            FamilySpec f = detail::skeleton(name, 1, params);
            f.constants = {{"n", n}};
            if (walk) {
                f.variance(0, 0) = p("x^3/n^2 - x");
                f.laplace = LaplaceTransform{
                    p("((1 - sqrt(1 - (1 - n^2/x^2)*exp(-2*z)))/((1 - n/x)*exp(-z)))^n"), {"z"}};
                f.s_char = std::vector<Expr>{p("-log(1 - n^2/x^2)/2")};
                f.reference_mean = {n / (2 * q - 1)};
                f.grid_box = {{"x", {1.02 * n, 1.2 * n}}};
            } else {
                f.variance(0, 0) = p("x^3/n^2 - x^2/n");
                f.s_char = std::vector<Expr>{p("(1 - n/x) - log(1 - n/x)")};
                f.reference_mean = {n / (1 - q)};
                f.grid_box = {{"x", {1.1 * n, 3.0 * n}}};
            }
            f.domain.box = {{"x", {n, inf}}};
            f.domain.sampling = {{"x", {1.05 * n, 10.0 * n}}};
            return f;
        }
        const std::size_t m = multi.size();
        for (double q : multi) {
            if (walk)
                check(q > 0.5 && q < 1, name, "1/2 < p_i < 1");
            else
                check(q > 0 && q < 1, name, "0 < alpha_i < 1");
        }
        FamilySpec f = detail::skeleton(name, m, params);
        f.constants = {{"n", n}};
        f.verified = false;
        const std::string xsum = detail::sum_of(f.mean_vars);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const std::string& xi = f.mean_vars[i];
                const std::string& xj = f.mean_vars[j];
                std::string delta = i == j ? "1" : "0";
                if (walk) {
                    // n(2p_i-1)^-1 (delta_ij - (2p_j-1)^-1)(2(2p-1) - (2p-1)^-1) with (2p_k-1)^-1 = x_k/n
                    // and 2p-1 = n/|x|.
                    f.variance(i, j) =
                        p(xi + "*(" + delta + " - " + xj + "/n)*(2*n/" + xsum + " - " + xsum + "/n)");
                } else {
                    // n(1-alpha_j)^-1 (delta_ij - (1-alpha_j)^-1 (2 - ((1-alpha)^-1 - alpha))) with
                    // (1-alpha_k)^-1 = x_k/n and 1-alpha = n/|x|.
                    f.variance(i, j) = p(xj + "*(" + delta + " - " + xj + "/n*(2 - (" + xsum + "/n - (1 - n/" +
                                         xsum + "))))");
                }
            }
            f.domain.box[f.mean_vars[i]] = {n, inf};
            f.domain.sampling[f.mean_vars[i]] = {1.05 * n, 10.0 * n};
            f.reference_mean.push_back(walk ? n / (2 * multi[i] - 1) : n / (1 - multi[i]));
        }
        f.grid_box = f.domain.sampling;
        f.note = "multivariate descriptor implemented as printed; not reproducible from its univariate form";
        return f;
    }
    throw ArgumentError("unknown family '" + name + "'");
}

// ---- validation -------------------------------------------------------------

struct ValidationIssue {
    std::string kind;  // "asymmetric" | "not_positive_definite" | "laplace_not_normalized"
    Bindings point;
    std::string detail;
};

/// Symmetry, positive definiteness and phi(0,x) = 1 on `points` seeded sample points.
inline std::vector<ValidationIssue> validate(const FamilySpec& f, std::size_t points = 64,
                                             std::uint64_t seed = default_seed) {
    std::vector<ValidationIssue> issues;
    auto pts = f.sample_points(points, seed);
    for (std::size_t i = 0; i < f.dim; ++i)
        for (std::size_t j = i + 1; j < f.dim; ++j) {
            EquivReport rep = equiv_report(f.variance(i, j), f.variance(j, i), pts, 1e-9);
            if (!rep.equivalent)
                issues.push_back({"asymmetric", {},
                                  "V(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") != V(" +
                                      std::to_string(j + 1) + "," + std::to_string(i + 1) + ")"});
        }
    Expr phi0;
    if (f.laplace) {
        std::map<std::string, Expr> zero;
        for (const auto& z : f.laplace->z_vars) zero[z] = Expr::num(0);
        phi0 = substitute(f.laplace->expr, zero);
    }
    for (const auto& b : pts) {
        if (!is_positive_definite(f.variance_at(b))) {
            issues.push_back({"not_positive_definite", b, "V is not positive definite"});
            break;
        }
        if (f.laplace) {
            double v = eval(phi0, b);
            if (std::fabs(v - 1.0) > 1e-12) {
                issues.push_back({"laplace_not_normalized", b, "phi(0, x) = " + Number::real(v).str()});
                break;
            }
        }
    }
    return issues;
}

inline std::string describe_point(const Bindings& b) {
    std::string s = "{";
    bool first = true;
    for (const auto& [k, v] : b) {
        s += (first ? "" : ", ") + k + "=" + Number::real(v).str();
        first = false;
    }
    return s + "}";
}

/// User-defined family from its variance matrix (strings in the expression grammar).
inline FamilySpec from_variance(const std::vector<std::vector<std::string>>& v_text,
                                const std::vector<std::string>& mean_vars, const Box& domain,
                                const Bindings& constants = {}, const std::string& name = "user") {
    const std::size_t m = mean_vars.size();
    if (m == 0) throw ArgumentError("from_variance: no mean variables");
    if (v_text.size() != m) throw ArgumentError("from_variance: V must be " + std::to_string(m) + "x" + std::to_string(m));
    FamilySpec f;
    f.name = name;
    f.dim = m;
    f.mean_vars = mean_vars;
    f.constants = constants;
    f.variance = ExprMatrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        if (v_text[i].size() != m)
            throw ArgumentError("from_variance: V must be " + std::to_string(m) + "x" + std::to_string(m));
        for (std::size_t j = 0; j < m; ++j) f.variance(i, j) = parse(v_text[i][j]);
    }
    for (const auto& var : mean_vars) {
        auto it = domain.find(var);
        if (it == domain.end()) throw ArgumentError("from_variance: domain has no range for '" + var + "'");
        const Interval& iv = it->second;
        if (!(iv.hi > iv.lo)) throw ArgumentError("from_variance: empty range for '" + var + "'");
        f.domain.box[var] = iv;
        Interval s = iv;
        if (!std::isfinite(s.lo) && !std::isfinite(s.hi)) s = {-10.0, 10.0};
        else if (!std::isfinite(s.lo)) s.lo = s.hi - 20.0;
        else if (!std::isfinite(s.hi)) s.hi = s.lo + 20.0;
        f.domain.sampling[var] = s;
    }
    f.grid_box = f.domain.sampling;
    for (const auto& issue : validate(f)) {
        if (issue.kind == "asymmetric") throw ArgumentError("from_variance: " + issue.detail + " beyond tolerance 1e-9");
        throw ArgumentError("from_variance: V is not positive definite at " + describe_point(issue.point));
    }
    return f;
}

// ---- membership residuals -----------------------------------------------------

struct GridSpec {
    Interval z{-0.5, 0.5};
    /// Ranges for the free coordinates; defaults to the family's grid box.
    Box box;
    std::size_t points = 5;
};

struct ResidualPoint {
    Vector z;
    Vector x;
    Vector residual;  // one entry per coordinate i
};

struct ResidualReport {
    std::vector<ResidualPoint> grid;
    double max_abs = 0.0;
    double tol = 0.0;
    bool pass = false;
    std::size_t skipped = 0;
};

inline std::vector<double> linspace(Interval iv, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = n == 1 ? 0.5 * (iv.lo + iv.hi) : iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

/// Residual of  d phi/d z_i + sum_j V_ij d phi/d x_j + x_i phi  on a tensor grid over
/// (z, free coordinates). Points where phi is undefined are skipped and counted.
inline ResidualReport verify_eq1(const FamilySpec& f, GridSpec grid = {}, double tol = 1e-8) {
    if (!f.laplace) throw ArgumentError(f.name + ": no Laplace transform to verify");
    if (grid.box.empty()) grid.box = f.grid_box.empty() ? f.domain.sampling : f.grid_box;
    const auto& phi = f.laplace->expr;
    const std::size_t m = f.dim;
    std::vector<Expr> dz(m);
    std::vector<Expr> dx(m);
    for (std::size_t i = 0; i < m; ++i) {
        dz[i] = diff(phi, f.laplace->z_vars[i]);
        dx[i] = f.d_dmean(phi, i);
    }

    std::vector<std::pair<std::string, std::vector<double>>> axes;
    for (const auto& z : f.laplace->z_vars) axes.emplace_back(z, linspace(grid.z, grid.points));
    for (const auto& [name, iv] : grid.box) axes.emplace_back(name, linspace(iv, grid.points));

    ResidualReport rep;
    rep.tol = tol;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        Bindings b;
        for (std::size_t a = 0; a < axes.size(); ++a) b[axes[a].first] = axes[a].second[idx[a]];
        auto full = f.complete(b);
        bool ok = full.has_value();
        ResidualPoint pt;
        if (ok) {
            try {
                Evaluator ev(*full);
                double ph = ev(phi);
                for (std::size_t i = 0; i < m; ++i) {
                    double r = ev(dz[i]) + ev(Expr::var(f.mean_vars[i])) * ph;
                    for (std::size_t j = 0; j < m; ++j) r += ev(f.variance(i, j)) * ev(dx[j]);
                    pt.residual.push_back(r);
                    if (!std::isfinite(r)) ok = false;
                }
                for (const auto& z : f.laplace->z_vars) pt.z.push_back(full->at(z));
                pt.x = f.mean_at(*full);
            } catch (const EvalError&) {
                ok = false;
            }
        }
        if (ok) {
            for (double r : pt.residual) rep.max_abs = std::max(rep.max_abs, std::fabs(r));
            rep.grid.push_back(std::move(pt));
        } else {
            ++rep.skipped;
        }
        std::size_t a = 0;
        while (a < axes.size() && ++idx[a] == axes[a].second.size()) idx[a++] = 0;
        if (a == axes.size()) break;
    }
    if (rep.grid.empty()) throw NumericalError(f.name + ": every grid point is outside the Laplace transform's domain");
    rep.pass = rep.max_abs <= tol;
    return rep;
}

/// s(x_query) with s(x_ref) = 0 and ds/dx = -1/V(x), by adaptive quadrature.
inline double s_characteristic_numeric(const FamilySpec& f, double x_ref, double x_query) {
    if (f.dim != 1) throw ArgumentError("s_characteristic_numeric: family must be univariate");
    if (x_ref == x_query) return 0.0;
    f.bind_mean({x_ref});
    f.bind_mean({x_query});
    auto inv_v = [&](double x) {
        Bindings b = f.bind_mean({x});
        double v = eval(f.variance(0, 0), b);
        if (!(v > 0.0))
            throw NumericalError(f.name + ": V is not positive at x = " + Number::real(x).str());
        return 1.0 / v;
    };
    return -integrate_adaptive(inv_v, x_ref, x_query, 1e-10).value;
}

/// phi(z, x) from the stored expression.
inline double laplace_eval(const FamilySpec& f, std::span<const double> z, std::span<const double> x) {
    if (!f.laplace) throw ArgumentError(f.name + ": no Laplace transform");
    if (z.size() != f.dim) throw ArgumentError(f.name + ": z must have " + std::to_string(f.dim) + " coordinates");
    Bindings b = f.bind_mean(x);
    for (std::size_t i = 0; i < f.dim; ++i) b[f.laplace->z_vars[i]] = z[i];
    return eval(f.laplace->expr, b);
}

inline double laplace_eval(const FamilySpec& f, double z, double x) {
    return laplace_eval(f, std::span<const double>(&z, 1), std::span<const double>(&x, 1));
}

}  // namespace classb
