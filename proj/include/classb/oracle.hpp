#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "classb/errors.hpp"
#include "classb/matrix.hpp"
#include "classb/moments.hpp"
#include "classb/rng.hpp"

// Ground truth computed from probability mass/density functions, independent of the
// recursion machinery: direct summation, quadrature, exact tails and seeded samplers.
namespace classb::oracle {

using Params = std::map<std::string, double>;
using MomentMap = std::map<MultiIndex, double>;

inline constexpr double default_tail_tol = 1e-13;

namespace detail {

inline double get(const Params& p, const std::string& family, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw ArgumentError("oracle: " + family + " needs parameter '" + key + "'");
    return it->second;
}

inline std::vector<double> indexed(const Params& p, const std::string& base) {
    std::vector<double> out;
    for (std::size_t i = 1;; ++i) {
        auto it = p.find(base + std::to_string(i));
        if (it == p.end()) break;
        out.push_back(it->second);
    }
    return out;
}

inline bool is_multivariate_variant(const std::string& name, const Params& p) {
    if (name == "random_walk") return p.count("p1") > 0;
    if (name == "borel_tanner") return p.count("alpha1") > 0;
    return false;
}

inline double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

inline bool positive_integer(double v) { return v >= 1.0 && v == std::floor(v); }

inline void require(bool ok, const std::string& family, const std::string& what) {
    if (!ok) throw ArgumentError("oracle: " + family + " requires " + what);
}

inline NumMatrix mvnormal_covariance(const Params& params, std::size_t m) {
    NumMatrix cov(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            auto it = params.find("sigma" + std::to_string(i + 1) + std::to_string(j + 1));
            cov(i, j) = cov(j, i) = it == params.end() ? 0.0 : it->second;
        }
    return cov;
}

/// Parameter ranges of the underlying laws; multivariate walk/branching variants are
/// rejected later by the callers that do not support them.
inline void check_params(const std::string& name, const Params& params) {
    if (is_multivariate_variant(name, params)) return;
    auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (name == "binomial") {
        require(positive_integer(get(params, name, "n")), name, "a positive integer n");
        require(open_unit(get(params, name, "p")), name, "0 < p < 1");
    } else if (name == "poisson") {
        require(get(params, name, "lambda") > 0.0, name, "lambda > 0");
    } else if (name == "negative_binomial") {
        require(get(params, name, "n") > 0.0, name, "n > 0");
        require(open_unit(get(params, name, "p")), name, "0 < p < 1");
    } else if (name == "logarithmic") {
        require(open_unit(get(params, name, "theta")), name, "0 < theta < 1");
    } else if (name == "random_walk") {
        require(positive_integer(get(params, name, "n")), name, "a positive integer n");
        const double p = get(params, name, "p");
        require(p > 0.5 && p < 1.0, name, "1/2 < p < 1");
    } else if (name == "borel_tanner") {
        require(positive_integer(get(params, name, "n")), name, "a positive integer n");
        require(open_unit(get(params, name, "alpha")), name, "0 < alpha < 1");
    } else if (name == "normal") {
        get(params, name, "alpha");
        require(get(params, name, "sigma2") > 0.0, name, "sigma2 > 0");
    } else if (name == "gamma") {
        require(get(params, name, "alpha") > 0.0, name, "alpha > 0");
        require(get(params, name, "lambda") > 0.0, name, "lambda > 0");
    } else if (name == "mvnormal") {
        const std::size_t m = indexed(params, "alpha").size();
        require(m >= 1, name, "alpha1..alpham");
        require(is_positive_definite(mvnormal_covariance(params, m)), name, "a positive definite sigma matrix");
    } else if (name == "multinomial" || name == "negative_multinomial") {
        const double n = get(params, name, "n");
        require(name == "multinomial" ? positive_integer(n) : n > 0.0, name,
                name == "multinomial" ? "a positive integer n" : "n > 0");
        const std::vector<double> p = indexed(params, "p");
        require(!p.empty(), name, "p1..pm");
        double total = 0.0;
        for (double v : p) {
            require(v > 0.0, name, "p_i > 0");
            total += v;
        }
        if (name == "multinomial") require(total < 1.0, name, "p1 + ... + pm < 1");
    } else if (name == "mv_logarithmic") {
        const std::vector<double> theta = indexed(params, "theta");
        require(!theta.empty(), name, "theta1..thetam");
        double total = 0.0;
        for (double v : theta) {
            require(v > 0.0, name, "theta_i > 0");
            total += v;
        }
        require(total < 1.0, name, "theta1 + ... + thetam < 1");
    } else {
        throw ArgumentError("oracle: unknown family '" + name + "'");
    }
}

/// A univariate lattice law: support start, start+step, ... (up to `last` when finite).
struct LatticeLaw {
    long start = 0;
    long step = 1;
    std::optional<long> last;
    std::function<double(long)> log_pmf;
};

inline LatticeLaw lattice_law(const std::string& name, const Params& params) {
    LatticeLaw law;
    if (is_multivariate_variant(name, params))
        throw ArgumentError("oracle: no probability mass function for the multivariate " + name + " family");
    if (name == "binomial") {
        const double n = get(params, name, "n");
        const double p = get(params, name, "p");
        law.last = static_cast<long>(n);
        law.log_pmf = [n, p](long k) {
            return log_choose(n, double(k)) + double(k) * std::log(p) + (n - double(k)) * std::log1p(-p);
        };
    } else if (name == "poisson") {
        const double lambda = get(params, name, "lambda");
        law.log_pmf = [lambda](long k) { return -lambda + double(k) * std::log(lambda) - std::lgamma(double(k) + 1); };
    } else if (name == "negative_binomial") {
        const double n = get(params, name, "n");
        const double p = get(params, name, "p");
        law.log_pmf = [n, p](long k) {
            double kk = double(k);
            return std::lgamma(n + kk) - std::lgamma(n) - std::lgamma(kk + 1) + n * std::log(p) + kk * std::log1p(-p);
        };
    } else if (name == "logarithmic") {
        const double theta = get(params, name, "theta");
        law.start = 1;
        law.log_pmf = [theta](long k) {
            return double(k) * std::log(theta) - std::log(double(k)) - std::log(-std::log1p(-theta));
        };
    } else if (name == "random_walk") {
        // First passage from n to 0 with left-step probability p: k = n, n+2, ...
        const double n = get(params, name, "n");
        const double p = get(params, name, "p");
        law.start = static_cast<long>(n);
        law.step = 2;
        law.log_pmf = [n, p](long k) {
            double kk = double(k);
            double left = 0.5 * (kk + n);
            return std::log(n / kk) + log_choose(kk, left) + left * std::log(p) + (kk - left) * std::log1p(-p);
        };
    } else if (name == "borel_tanner") {
        // Total progeny of a Poisson(alpha) branching process started by n individuals.
        const double n = get(params, name, "n");
        const double alpha = get(params, name, "alpha");
        law.start = static_cast<long>(n);
        law.log_pmf = [n, alpha](long k) {
            double kk = double(k);
            return std::log(n / kk) - alpha * kk + (kk - n) * std::log(alpha * kk) - std::lgamma(kk - n + 1);
        };
    } else {
        throw ArgumentError("oracle: '" + name + "' is not a discrete univariate family");
    }
    return law;
}

// Visits the support of a lattice law until the remaining contribution to every power
// up to `max_power` is below tail_tol relative to the accumulated sums.
template <class Visit>
void walk_lattice(const LatticeLaw& law, unsigned max_power, double tail_tol, Visit&& visit) {
    double mass = 0.0;
    double top = 0.0;
    double prev_mass_term = 0.0;
    double prev_top_term = 0.0;
    const long cap = 100'000'000;
    long count = 0;
    for (long k = law.start;; k += law.step, ++count) {
        if (law.last && k > *law.last) return;
        if (count > cap) throw NumericalError("oracle: support truncation did not converge");
        const double pk = std::exp(law.log_pmf(k));
        visit(k, pk);
        const double top_term = pk * std::pow(std::max(1.0, std::fabs(double(k))), double(max_power));
        mass += pk;
        top += top_term;
        if (!law.last && count > 2 && pk > 0.0) {
            const double r_mass = pk / prev_mass_term;
            const double r_top = top_term / prev_top_term;
            if (r_mass < 1.0 && r_top < 1.0 && pk / (1.0 - r_mass) < tail_tol * mass &&
                top_term / (1.0 - r_top) < tail_tol * top)
                return;
        }
        if (!law.last && count > 2 && pk == 0.0 && mass > 0.5) return;
        prev_mass_term = pk;
        prev_top_term = top_term;
    }
}

struct CompositionLaw {
    std::size_t dim = 0;
    std::size_t min_level = 0;
    std::optional<std::size_t> max_level;
    std::function<double(const std::vector<unsigned>&)> log_pmf;
};

inline CompositionLaw composition_law(const std::string& name, const Params& params) {
    CompositionLaw law;
    if (name == "multinomial" || name == "negative_multinomial") {
        const bool negative = name == "negative_multinomial";
        const double n = get(params, name, "n");
        const std::vector<double> p = indexed(params, "p");
        if (p.empty()) throw ArgumentError("oracle: " + name + " needs p1..pm");
        law.dim = p.size();
        double total = 0.0;
        for (double v : p) total += v;
        if (!negative) {
            law.max_level = static_cast<std::size_t>(n);
            const double p0 = 1.0 - total;
            law.log_pmf = [n, p, p0](const std::vector<unsigned>& k) {
                double acc = std::lgamma(n + 1);
                double used = 0.0;
                for (std::size_t i = 0; i < k.size(); ++i) {
                    acc += double(k[i]) * std::log(p[i]) - std::lgamma(double(k[i]) + 1);
                    used += k[i];
                }
                return acc + (n - used) * std::log(p0) - std::lgamma(n - used + 1);
            };
        } else {
            // pgf (1 + sum p_i (1 - s_i))^{-n}; mean n p_i.
            law.log_pmf = [n, p, total](const std::vector<unsigned>& k) {
                double used = 0.0;
                double acc = 0.0;
                for (std::size_t i = 0; i < k.size(); ++i) {
                    acc += double(k[i]) * std::log(p[i]) - std::lgamma(double(k[i]) + 1);
                    used += k[i];
                }
                return acc + std::lgamma(n + used) - std::lgamma(n) - (n + used) * std::log1p(total);
            };
        }
        return law;
    }
    if (name == "mv_logarithmic") {
        const std::vector<double> theta = indexed(params, "theta");
        if (theta.empty()) throw ArgumentError("oracle: mv_logarithmic needs theta1..thetam");
        law.dim = theta.size();
        law.min_level = 1;
        double total = 0.0;
        for (double v : theta) total += v;
        const double norm = std::log(-std::log1p(-total));
        law.log_pmf = [theta, norm](const std::vector<unsigned>& k) {
            double used = 0.0;
            double acc = 0.0;
            for (std::size_t i = 0; i < k.size(); ++i) {
                acc += double(k[i]) * std::log(theta[i]) - std::lgamma(double(k[i]) + 1);
                used += k[i];
            }
            return acc + std::lgamma(used) - norm;
        };
        return law;
    }
    throw ArgumentError("oracle: '" + name + "' is not a discrete multivariate family");
}

// Calls visit(k) for every composition of `level` into law.dim non-negative parts.
template <class Visit>
void for_each_composition(std::size_t dim, unsigned level, Visit&& visit) {
    std::vector<unsigned> k(dim, 0);
    auto rec = [&](auto&& self, std::size_t pos, unsigned remaining) -> void {
        if (pos + 1 == dim) {
            k[pos] = remaining;
            visit(k);
            return;
        }
        for (unsigned v = 0; v <= remaining; ++v) {
            k[pos] = v;
            self(self, pos + 1, remaining - v);
        }
    };
    rec(rec, 0, level);
}

template <class Visit>
void walk_compositions(const CompositionLaw& law, unsigned max_power, double tail_tol, Visit&& visit) {
    double mass = 0.0;
    double top = 0.0;
    double prev_mass = 0.0;
    double prev_top = 0.0;
    for (std::size_t level = law.min_level;; ++level) {
        if (law.max_level && level > *law.max_level) return;
        if (level > 100000) throw NumericalError("oracle: support truncation did not converge");
        double level_mass = 0.0;
        for_each_composition(law.dim, static_cast<unsigned>(level), [&](const std::vector<unsigned>& k) {
            const double pk = std::exp(law.log_pmf(k));
            level_mass += pk;
            visit(k, pk);
        });
        const double top_term = level_mass * std::pow(std::max(1.0, double(level)), double(max_power));
        mass += level_mass;
        top += top_term;
        if (!law.max_level && level > law.min_level + 2 && level_mass > 0.0) {
            const double r_mass = level_mass / prev_mass;
            const double r_top = top_term / prev_top;
            if (r_mass < 1.0 && r_top < 1.0 && level_mass / (1.0 - r_mass) < tail_tol * mass &&
                top_term / (1.0 - r_top) < tail_tol * top)
                return;
        }
        prev_mass = level_mass;
        prev_top = top_term;
    }
}

inline bool is_lattice_family(const std::string& name) {
    return name == "binomial" || name == "poisson" || name == "negative_binomial" || name == "logarithmic" ||
           name == "random_walk" || name == "borel_tanner";
}

inline bool is_composition_family(const std::string& name) {
    return name == "multinomial" || name == "negative_multinomial" || name == "mv_logarithmic";
}

}  // namespace detail

/// Raw moments E xi^k for |k| <= K by direct pmf summation. The 0-index holds the summed
/// mass, which should be 1 within tail_tol.
inline MomentMap enumerate_moments(const std::string& name, const Params& params, unsigned K,
                                   double tail_tol = default_tail_tol) {
    if (!(tail_tol > 0.0)) throw ArgumentError("enumerate_moments: tail_tol must be positive");
    if (detail::is_lattice_family(name) || detail::is_composition_family(name)) detail::check_params(name, params);
    MomentMap out;
    if (detail::is_lattice_family(name)) {
        std::vector<double> acc(K + 1, 0.0);
        detail::walk_lattice(detail::lattice_law(name, params), K, tail_tol, [&](long k, double pk) {
            double pw = pk;
            for (unsigned j = 0; j <= K; ++j, pw *= double(k)) acc[j] += pw;
        });
        for (unsigned j = 0; j <= K; ++j) out[MultiIndex{j}] = acc[j];
        return out;
    }
    if (detail::is_composition_family(name)) {
        const detail::CompositionLaw law = detail::composition_law(name, params);
        const std::vector<MultiIndex> idx = indices_up_to(law.dim, K);
        std::vector<double> acc(idx.size(), 0.0);
        detail::walk_compositions(law, K, tail_tol, [&](const std::vector<unsigned>& k, double pk) {
            for (std::size_t t = 0; t < idx.size(); ++t) {
                double v = pk;
                for (std::size_t i = 0; i < law.dim; ++i) v *= std::pow(double(k[i]), double(idx[t][i]));
                acc[t] += v;
            }
        });
        for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t]] = acc[t];
        return out;
    }
    throw ArgumentError("enumerate_moments: '" + name + "' is not an enumerable discrete family");
}

/// Raw moments of the normal, gamma or multivariate normal law by adaptive quadrature of
/// t^k times the density.
inline MomentMap quadrature_moments(const std::string& name, const Params& params, unsigned K) {
    if (name == "normal" || name == "gamma" || name == "mvnormal") detail::check_params(name, params);
    MomentMap out;
    const double inf = std::numeric_limits<double>::infinity();
    if (name == "normal") {
        const double alpha = detail::get(params, name, "alpha");
        const double sd = std::sqrt(detail::get(params, name, "sigma2"));
        for (unsigned k = 0; k <= K; ++k) {
            auto f = [&](double u) {
                return std::pow(alpha + sd * u, double(k)) * std::exp(-0.5 * u * u) / std::sqrt(2 * std::numbers::pi);
            };
            out[MultiIndex{k}] = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-13);
        }
        return out;
    }
    if (name == "gamma") {
        const double rate = detail::get(params, name, "alpha");
        const double shape = detail::get(params, name, "lambda");
        boost::math::quadrature::exp_sinh<double> integrator;
        for (unsigned k = 0; k <= K; ++k) {
            // Integrate in u = rate * t so the scale of the integrand is fixed.
            auto f = [&](double u) {
                if (u <= 0.0) return 0.0;
                return std::exp((shape + double(k) - 1.0) * std::log(u) - u - std::lgamma(shape));
            };
            double v = integrator.integrate(f, 1e-13);
            out[MultiIndex{k}] = v * std::pow(rate, -double(k));
        }
        return out;
    }
    if (name == "mvnormal") {
        // xi = alpha + L u with u standard normal; nested quadrature over u.
        const std::vector<double> alpha = detail::indexed(params, "alpha");
        const std::size_t m = alpha.size();
        if (m > 3) throw ArgumentError("quadrature_moments: mvnormal limited to m <= 3");
        const NumMatrix l = cholesky(detail::mvnormal_covariance(params, m));
        std::vector<double> u(m);
        for (const MultiIndex& k : indices_up_to(m, K)) {
            auto integrand = [&]() {
                double v = 1.0;
                for (std::size_t i = 0; i < m; ++i) {
                    double xi = alpha[i];
                    for (std::size_t j = 0; j <= i; ++j) xi += l(i, j) * u[j];
                    v *= std::pow(xi, double(k[i]));
                }
                return v;
            };
            auto level = [&](auto&& self, std::size_t d) -> double {
                if (d == m) return integrand();
                auto f = [&](double t) {
                    u[d] = t;
                    return self(self, d + 1) * std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi);
                };
                return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -inf, inf, 15, 1e-13);
            };
            out[k] = level(level, 0);
        }
        return out;
    }
    throw ArgumentError("quadrature_moments: '" + name + "' is not a continuous family");
}

/// Raw moments from whichever exact route the family supports.
inline MomentMap exact_moments(const std::string& name, const Params& params, unsigned K) {
    if (name == "normal" || name == "gamma" || name == "mvnormal") return quadrature_moments(name, params, K);
    return enumerate_moments(name, params, K);
}

/// P(xi >= y) for a univariate family.
inline double exact_tail(const std::string& name, const Params& params, double y) {
    detail::check_params(name, params);
    if (name == "normal") {
        const double alpha = detail::get(params, name, "alpha");
        const double s2 = detail::get(params, name, "sigma2");
        return 0.5 * boost::math::erfc((y - alpha) / std::sqrt(2.0 * s2));
    }
    if (name == "gamma") {
        if (y <= 0.0) return 1.0;
        return boost::math::gamma_q(detail::get(params, name, "lambda"), detail::get(params, name, "alpha") * y);
    }
    if (!detail::is_lattice_family(name)) throw ArgumentError("exact_tail: unsupported family '" + name + "'");
    detail::LatticeLaw law = detail::lattice_law(name, params);
    const double eps = 1e-9 * std::max(1.0, std::fabs(y));
    if (y <= double(law.start) + eps) return 1.0;
    // First lattice point at or above y.
    long first = law.start + law.step * static_cast<long>(std::ceil((y - eps - double(law.start)) / double(law.step)));
    if (law.last && first > *law.last) return 0.0;
    detail::LatticeLaw shifted = law;
    shifted.start = first;
    double tail = 0.0;
    detail::walk_lattice(shifted, 0, 1e-16, [&](long, double pk) { tail += pk; });
    return std::min(1.0, tail);
}

// ---- mean parametrization --------------------------------------------------------

/// Underlying parameters of the built-in family whose mean is x (other parameters kept).
inline Params params_at_mean(const std::string& name, const Params& params, std::span<const double> x) {
    Params out = params;
    auto need = [&](std::size_t m) {
        if (x.size() != m) throw ArgumentError("params_at_mean: " + name + " expects " + std::to_string(m) + " coordinates");
    };
    if (detail::is_multivariate_variant(name, params))
        throw ArgumentError("params_at_mean: no parametrization for the multivariate " + name + " family");
    if (name == "binomial") {
        need(1);
        out["p"] = x[0] / detail::get(params, name, "n");
    } else if (name == "poisson") {
        need(1);
        out["lambda"] = x[0];
    } else if (name == "negative_binomial") {
        need(1);
        const double n = detail::get(params, name, "n");
        out["p"] = n / (n + x[0]);
    } else if (name == "normal") {
        need(1);
        out["alpha"] = x[0];
    } else if (name == "gamma") {
        need(1);
        out["alpha"] = detail::get(params, name, "lambda") / x[0];
    } else if (name == "random_walk") {
        need(1);
        out["p"] = 0.5 * (1.0 + detail::get(params, name, "n") / x[0]);
    } else if (name == "borel_tanner") {
        need(1);
        out["alpha"] = 1.0 - detail::get(params, name, "n") / x[0];
    } else if (name == "mvnormal") {
        for (std::size_t i = 0; i < x.size(); ++i) out["alpha" + std::to_string(i + 1)] = x[i];
    } else if (name == "multinomial" || name == "negative_multinomial") {
        const double n = detail::get(params, name, "n");
        for (std::size_t i = 0; i < x.size(); ++i) out["p" + std::to_string(i + 1)] = x[i] / n;
    } else if (name == "logarithmic" || name == "mv_logarithmic") {
        // |x| = -T / ((1-T) log(1-T)) is increasing in T on (0,1); theta_i = T x_i / |x|.
        double total = 0.0;
        for (double v : x) total += v;
        if (!(total > 1.0)) throw ArgumentError("params_at_mean: logarithmic mean must exceed 1");
        auto mean_of = [](double t) { return -t / ((1.0 - t) * std::log1p(-t)); };
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (mean_of(mid) < total ? lo : hi) = mid;
        }
        const double t = 0.5 * (lo + hi);
        if (name == "logarithmic") {
            need(1);
            out["theta"] = t;
        } else {
            for (std::size_t i = 0; i < x.size(); ++i) out["theta" + std::to_string(i + 1)] = t * x[i] / total;
        }
    } else {
        throw ArgumentError("params_at_mean: unknown family '" + name + "'");
    }
    return out;
}

// ---- densities -------------------------------------------------------------------

/// log pmf (discrete) or log pdf (continuous) at a point; -inf off the support.
inline double log_density(const std::string& name, const Params& params, std::span<const double> t) {
    const double ninf = -std::numeric_limits<double>::infinity();
    detail::check_params(name, params);
    if (name == "normal") {
        const double alpha = detail::get(params, name, "alpha");
        const double s2 = detail::get(params, name, "sigma2");
        return -0.5 * (t[0] - alpha) * (t[0] - alpha) / s2 - 0.5 * std::log(2 * std::numbers::pi * s2);
    }
    if (name == "gamma") {
        if (!(t[0] > 0.0)) return ninf;
        const double rate = detail::get(params, name, "alpha");
        const double shape = detail::get(params, name, "lambda");
        return shape * std::log(rate) - std::lgamma(shape) + (shape - 1) * std::log(t[0]) - rate * t[0];
    }
    if (name == "mvnormal") {
        const std::vector<double> alpha = detail::indexed(params, "alpha");
        const std::size_t m = alpha.size();
        const NumMatrix cov = detail::mvnormal_covariance(params, m);
        NumMatrix l = cholesky(cov);
        Vector r(m);
        for (std::size_t i = 0; i < m; ++i) r[i] = t[i] - alpha[i];
        // Solve L w = r; the quadratic form is |w|^2.
        double quad = 0.0;
        double logdet = 0.0;
        Vector w(m);
        for (std::size_t i = 0; i < m; ++i) {
            double s = r[i];
            for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * w[j];
            w[i] = s / l(i, i);
            quad += w[i] * w[i];
            logdet += 2 * std::log(l(i, i));
        }
        return -0.5 * quad - 0.5 * logdet - 0.5 * double(m) * std::log(2 * std::numbers::pi);
    }
    if (detail::is_lattice_family(name)) {
        detail::LatticeLaw law = detail::lattice_law(name, params);
        const double v = t[0];
        if (v != std::floor(v) || v < double(law.start) || (law.last && v > double(*law.last))) return ninf;
        const long k = static_cast<long>(v);
        if ((k - law.start) % law.step != 0) return ninf;
        return law.log_pmf(k);
    }
    if (detail::is_composition_family(name)) {
        detail::CompositionLaw law = detail::composition_law(name, params);
        std::vector<unsigned> k(law.dim);
        std::size_t level = 0;
        for (std::size_t i = 0; i < law.dim; ++i) {
            if (t[i] < 0 || t[i] != std::floor(t[i])) return ninf;
            k[i] = static_cast<unsigned>(t[i]);
            level += k[i];
        }
        if (level < law.min_level || (law.max_level && level > *law.max_level)) return ninf;
        return law.log_pmf(k);
    }
    throw ArgumentError("log_density: unsupported family '" + name + "'");
}

// ---- samplers --------------------------------------------------------------------

struct SampleSet {
    std::size_t dim = 1;
    std::vector<double> data;  // row-major, one row per draw
    /// Draws abandoned at the step cap (walk and branching samplers only).
    std::size_t cap_hits = 0;

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
    double operator()(std::size_t row, std::size_t col) const { return data[row * dim + col]; }
};

inline constexpr long step_cap = 10'000'000;

namespace detail {

inline double standard_normal(Xoshiro256& rng) {
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Marsaglia-Tsang with the u^{1/shape} boost for shape < 1; unit rate.
inline double standard_gamma(double shape, Xoshiro256& rng) {
    if (shape < 1.0) return standard_gamma(shape + 1.0, rng) * std::pow(rng.uniform_open(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_open();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

// Sequential inversion, splitting large rates into pieces below 30.
inline long poisson_draw(double rate, Xoshiro256& rng) {
    if (rate <= 0.0) return 0;
    const long pieces = static_cast<long>(std::ceil(rate / 30.0));
    const double r = rate / double(pieces);
    long total = 0;
    for (long piece = 0; piece < pieces; ++piece) {
        double u = rng.uniform();
        double p = std::exp(-r);
        double cdf = p;
        long k = 0;
        while (u > cdf && k < 10000) {
            ++k;
            p *= r / double(k);
            cdf += p;
        }
        total += k;
    }
    return total;
}

// Inverse-CDF table over the truncated support of a lattice law.
class LatticeTable {
  public:
    explicit LatticeTable(const LatticeLaw& law) {
        double acc = 0.0;
        walk_lattice(law, 1, 1e-16, [&](long k, double pk) {
            acc += pk;
            values_.push_back(double(k));
            cdf_.push_back(acc);
        });
        for (double& c : cdf_) c /= acc;
    }

    double draw(Xoshiro256& rng) const {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) --it;
        return values_[static_cast<std::size_t>(it - cdf_.begin())];
    }

  private:
    std::vector<double> values_;
    std::vector<double> cdf_;
};

}  // namespace detail

/// `count` seeded draws; identical seeds give identical samples.
inline SampleSet mc_sample(const std::string& name, const Params& params, std::size_t count,
                           std::uint64_t seed = default_seed) {
    if (count < 1) throw ArgumentError("mc_sample: count must be >= 1");
    detail::check_params(name, params);
    Xoshiro256 rng(seed);
    SampleSet s;
    if (detail::is_multivariate_variant(name, params))
        throw ArgumentError("mc_sample: no sampler for the multivariate " + name + " family");
    if (name == "random_walk") {
        const long n = static_cast<long>(detail::get(params, name, "n"));
        const double p = detail::get(params, name, "p");
        s.data.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            long pos = n;
            long steps = 0;
            while (pos > 0 && steps < step_cap) {
                pos += rng.uniform() < p ? -1 : 1;
                ++steps;
            }
            if (pos > 0) {
                ++s.cap_hits;
                continue;
            }
            s.data.push_back(double(steps));
        }
    } else if (name == "borel_tanner") {
        const long n = static_cast<long>(detail::get(params, name, "n"));
        const double alpha = detail::get(params, name, "alpha");
        detail::LatticeTable offspring(detail::lattice_law("poisson", {{"lambda", alpha}}));
        s.data.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            long total = n;
            long pending = n;
            while (pending > 0 && total < step_cap) {
                --pending;
                const long kids = static_cast<long>(offspring.draw(rng));
                total += kids;
                pending += kids;
            }
            if (pending > 0) {
                ++s.cap_hits;
                continue;
            }
            s.data.push_back(double(total));
        }
    } else if (detail::is_lattice_family(name)) {
        detail::LatticeTable table(detail::lattice_law(name, params));
        s.data.resize(count);
        for (auto& v : s.data) v = table.draw(rng);
    } else if (name == "normal") {
        const double alpha = detail::get(params, name, "alpha");
        const double sd = std::sqrt(detail::get(params, name, "sigma2"));
        s.data.resize(count);
        for (auto& v : s.data) v = alpha + sd * detail::standard_normal(rng);
    } else if (name == "gamma") {
        const double rate = detail::get(params, name, "alpha");
        const double shape = detail::get(params, name, "lambda");
        s.data.resize(count);
        for (auto& v : s.data) v = detail::standard_gamma(shape, rng) / rate;
    } else if (name == "mvnormal") {
        const std::vector<double> alpha = detail::indexed(params, "alpha");
        const std::size_t m = alpha.size();
        const NumMatrix cov = detail::mvnormal_covariance(params, m);
        const NumMatrix l = cholesky(cov);
        s.dim = m;
        s.data.resize(count * m);
        Vector z(m);
        for (std::size_t r = 0; r < count; ++r) {
            for (auto& v : z) v = detail::standard_normal(rng);
            for (std::size_t i = 0; i < m; ++i) {
                double acc = alpha[i];
                for (std::size_t j = 0; j <= i; ++j) acc += l(i, j) * z[j];
                s.data[r * m + i] = acc;
            }
        }
    } else if (name == "multinomial") {
        const long n = static_cast<long>(detail::get(params, name, "n"));
        const std::vector<double> p = detail::indexed(params, "p");
        const std::size_t m = p.size();
        std::vector<double> cdf(m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) cdf[i] = acc += p[i];
        s.dim = m;
        s.data.assign(count * m, 0.0);
        for (std::size_t r = 0; r < count; ++r)
            for (long trial = 0; trial < n; ++trial) {
                const double u = rng.uniform();
                auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
                if (it != cdf.end()) s.data[r * m + static_cast<std::size_t>(it - cdf.begin())] += 1.0;
            }
    } else if (name == "negative_multinomial") {
        // Gamma(n) mixing of independent Poisson(G p_i) counts.
        const double n = detail::get(params, name, "n");
        const std::vector<double> p = detail::indexed(params, "p");
        const std::size_t m = p.size();
        s.dim = m;
        s.data.resize(count * m);
        for (std::size_t r = 0; r < count; ++r) {
            const double g = detail::standard_gamma(n, rng);
            for (std::size_t i = 0; i < m; ++i) s.data[r * m + i] = double(detail::poisson_draw(g * p[i], rng));
        }
    } else if (name == "mv_logarithmic") {
        // Total from the univariate logarithmic law, split multinomially with weights theta_i / T.
        const std::vector<double> theta = detail::indexed(params, "theta");
        const std::size_t m = theta.size();
        double total = 0.0;
        for (double v : theta) total += v;
        detail::LatticeTable level(detail::lattice_law("logarithmic", {{"theta", total}}));
        std::vector<double> cdf(m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) cdf[i] = acc += theta[i] / total;
        s.dim = m;
        s.data.assign(count * m, 0.0);
        for (std::size_t r = 0; r < count; ++r) {
            const long n = static_cast<long>(level.draw(rng));
            for (long trial = 0; trial < n; ++trial) {
                auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform());
                if (it == cdf.end()) --it;
                s.data[r * m + static_cast<std::size_t>(it - cdf.begin())] += 1.0;
            }
        }
    } else {
        throw ArgumentError("mc_sample: unsupported family '" + name + "'");
    }
    if (s.size() == 0) throw NumericalError("mc_sample: every draw hit the step cap");
    return s;
}

// ---- score covariance ------------------------------------------------------------

struct ScoreEstimate {
    NumMatrix covariance;
    NumMatrix standard_error;
    std::size_t samples = 0;
};

/// Monte Carlo estimate of E[score score^T] in the mean parametrization, with the score
/// d/dx log p(xi; x) taken by central differences of the log density.
inline ScoreEstimate score_covariance(const std::string& name, const Params& params, std::span<const double> x,
                                      std::size_t count, std::uint64_t seed = default_seed) {
    const std::size_t m = x.size();
    const Params at = params_at_mean(name, params, x);
    const SampleSet draws = mc_sample(name, at, count, seed);
    std::vector<Params> plus(m);
    std::vector<Params> minus(m);
    std::vector<double> h(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> xp(x.begin(), x.end());
        std::vector<double> xm(x.begin(), x.end());
        h[j] = 1e-5 * std::max(1.0, std::fabs(x[j]));
        xp[j] += h[j];
        xm[j] -= h[j];
        plus[j] = params_at_mean(name, params, xp);
        minus[j] = params_at_mean(name, params, xm);
    }
    NumMatrix sum(m, m, 0.0);
    NumMatrix sum_sq(m, m, 0.0);
    Vector score(m);
    const std::size_t rows = draws.size();
    for (std::size_t r = 0; r < rows; ++r) {
        std::span<const double> t(draws.data.data() + r * draws.dim, draws.dim);
        for (std::size_t j = 0; j < m; ++j)
            score[j] = (log_density(name, plus[j], t) - log_density(name, minus[j], t)) / (2 * h[j]);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double v = score[i] * score[j];
                sum(i, j) += v;
                sum_sq(i, j) += v * v;
            }
    }
    ScoreEstimate est;
    est.samples = rows;
    est.covariance = NumMatrix(m, m);
    est.standard_error = NumMatrix(m, m);
    const double nn = double(rows);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double mean = sum(i, j) / nn;
            const double var = std::max(0.0, sum_sq(i, j) / nn - mean * mean);
            est.covariance(i, j) = mean;
            est.standard_error(i, j) = std::sqrt(var / nn);
        }
    return est;
}

}  // namespace classb::oracle
