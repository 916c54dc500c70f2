#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "classb/closedforms.hpp"
#include "classb/families.hpp"
#include "classb/inference.hpp"
#include "classb/moments.hpp"
#include "classb/oracle.hpp"
#include "classb/tails.hpp"
#include "classb/transforms.hpp"

// The acceptance criteria of the library, each a self-contained check with a pinned
// tolerance and a runtime budget.
namespace classb::acceptance {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget = 0.0;
};

struct Options {
    std::size_t mc_samples = 1'000'000;
    std::uint64_t seed = default_seed;
};

namespace detail {

/// Collects comparisons; remembers the worst error and the first few failures.
class Tally {
  public:
    void close(double got, double want, double tol, const std::string& what) {
        const double scale = std::max({std::fabs(got), std::fabs(want), 1e-300});
        const double err = std::fabs(got - want) / scale;
        const bool ok = std::fabs(got - want) <= tol * scale || std::fabs(got - want) <= 1e-14;
        worst_ = std::max(worst_, std::isfinite(err) ? err : 1e300);
        check(ok, what + ": " + fmt(got) + " vs " + fmt(want));
    }

    void absolute(double got, double want, double tol, const std::string& what) {
        const double err = std::fabs(got - want);
        worst_ = std::max(worst_, std::isfinite(err) ? err : 1e300);
        check(err <= tol, what + ": " + fmt(got) + " vs " + fmt(want));
    }

    void check(bool ok, const std::string& what) {
        ++count_;
        if (ok) return;
        if (failures_.size() < 3) failures_.push_back(what);
        ++failed_;
    }

    bool pass() const { return failed_ == 0 && count_ > 0; }
    double worst() const { return worst_; }

    std::string summary(const std::string& label) const {
        std::ostringstream os;
        os << count_ << " checks, " << label << " " << fmt(worst_);
        if (failed_ > 0) {
            os << "; " << failed_ << " failed";
            for (const auto& f : failures_) os << "; " << f;
        }
        return os.str();
    }

    static std::string fmt(double v) {
        std::ostringstream os;
        os.precision(6);
        os << v;
        return os.str();
    }

  private:
    std::size_t count_ = 0;
    std::size_t failed_ = 0;
    double worst_ = 0.0;
    std::vector<std::string> failures_;
};

using Body = std::function<std::string(Tally&, const Options&)>;

struct Criterion {
    int id;
    std::string name;
    double budget;
    Body body;
};

inline std::map<MultiIndex, double> at_mean(const MomentTable& t, std::span<const double> x) {
    return evaluate_table_at(t, std::vector<double>(x.begin(), x.end()));
}

inline std::string c1_poisson(Tally& t, const Options&) {
    for (double lambda : {0.5, 2.0, 7.0}) {
        FamilySpec f = builtin("poisson", {{"lambda", lambda}});
        auto v = evaluate_table_at(cumulants(f, 12), std::vector<double>{lambda});
        for (unsigned k = 1; k <= 12; ++k)
            t.close(v.at(MultiIndex{k}), lambda, 1e-10, "lambda=" + Tally::fmt(lambda) + " k=" + std::to_string(k));
    }
    return t.summary("max relative error");
}

inline std::string c2_gamma(Tally& t, const Options&) {
    for (double shape : {1.0, 3.0})
        for (double rate : {0.5, 2.0}) {
            FamilySpec f = builtin("gamma", {{"alpha", rate}, {"lambda", shape}});
            auto v = evaluate_table_at(cumulants(f, 10), std::vector<double>{shape / rate});
            for (unsigned k = 1; k <= 10; ++k)
                t.close(v.at(MultiIndex{k}), gamma_cumulant(rate, shape, k), 1e-9,
                        "shape=" + Tally::fmt(shape) + " rate=" + Tally::fmt(rate) + " k=" + std::to_string(k));
        }
    return t.summary("max relative error");
}

inline std::string c3_quadratic(Tally& t, const Options& opt) {
    Xoshiro256 rng(opt.seed);
    int used = 0;
    while (used < 16) {
        const double a = -1.0 + 2.0 * rng.uniform();
        const double b = -1.0 + 2.0 * rng.uniform();
        const double x = 0.2 + 3.0 * rng.uniform();
        if (!(x * (a * x + b) > 0.05)) continue;
        FamilySpec f = from_variance({{"x*(a*x+b)"}}, {"x"}, {{"x", {x * 0.99, x * 1.01}}}, {{"a", a}, {"b", b}});
        auto table = evaluate_table(cumulants(f, 11), {{"x", x}});
        for (unsigned k = 1; k <= 10; ++k)
            t.close(cumulant_quadratic(a, b, x, k), table.at(MultiIndex{k + 1}), 1e-9,
                    "a=" + Tally::fmt(a) + " b=" + Tally::fmt(b) + " x=" + Tally::fmt(x) + " k=" + std::to_string(k));
        ++used;
    }
    return t.summary("max relative error");
}

inline std::string c4_oracle_moments(Tally& t, const Options&) {
    const std::vector<std::pair<std::string, oracle::Params>> cases = {
        {"binomial", {{"n", 5}, {"p", 0.3}}},
        {"poisson", {{"lambda", 2}}},
        {"negative_binomial", {{"n", 3}, {"p", 0.4}}},
        {"normal", {{"alpha", 0}, {"sigma2", 1}}},
        {"gamma", {{"alpha", 2}, {"lambda", 3}}},
    };
    for (const auto& [name, params] : cases) {
        FamilySpec f = builtin(name, params);
        auto rec = at_mean(raw_moments(f, 6), f.reference_mean);
        auto exact = oracle::exact_moments(name, params, 6);
        for (unsigned k = 1; k <= 6; ++k)
            t.close(rec.at(MultiIndex{k}), exact.at(MultiIndex{k}), 1e-8, name + " k=" + std::to_string(k));
    }
    return t.summary("max relative error");
}

inline std::string c5_residuals(Tally& t, const Options&) {
    const std::vector<std::pair<std::string, std::map<std::string, double>>> cases = {
        {"poisson", {{"lambda", 2}}},
        {"binomial", {{"n", 5}, {"p", 0.3}}},
        {"negative_binomial", {{"n", 3}, {"p", 0.4}}},
        {"normal", {{"alpha", 0}, {"sigma2", 1}}},
        {"gamma", {{"alpha", 2}, {"lambda", 3}}},
        {"multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}}},
    };
    for (const auto& [name, params] : cases) {
        GridSpec grid;
        grid.points = 5;
        ResidualReport r = verify_eq1(builtin(name, params), grid, 1e-8);
        t.absolute(r.max_abs, 0.0, 1e-8, name + " max residual");
        t.check(r.skipped == 0, name + ": " + std::to_string(r.skipped) + " grid points skipped");
    }
    return t.summary("max residual");
}

inline std::string c6_additivity(Tally& t, const Options&) {
    const std::vector<std::pair<std::string, std::map<std::string, double>>> cases = {
        {"poisson", {{"lambda", 2}}},
        {"binomial", {{"n", 5}, {"p", 0.3}}},
    };
    for (const auto& [name, params] : cases) {
        FamilySpec f = builtin(name, params);
        const double x = f.reference_mean[0];
        auto base = evaluate_table_at(cumulants(f, 6), std::vector<double>{x});
        for (std::int64_t n : {2, 5}) {
            auto sum = evaluate_table_at(cumulants(convolve_iid(f, n), 6), std::vector<double>{double(n) * x});
            for (unsigned k = 1; k <= 6; ++k)
                t.close(sum.at(MultiIndex{k}), double(n) * base.at(MultiIndex{k}), 1e-9,
                        name + " n=" + std::to_string(n) + " k=" + std::to_string(k));
        }
    }
    return t.summary("max relative error");
}

inline std::string c7_affine(Tally& t, const Options& opt) {
    // Seeded 2x2 matrix with half-integer entries, redrawn until |det| >= 1/2.
    Xoshiro256 rng(opt.seed);
    NumberMatrix a(2, 2);
    std::vector<Number> b(2);
    for (;;) {
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                a(i, j) = Number::rational(static_cast<std::int64_t>(rng.uniform() * 9.0) - 4, 2);
        if (std::fabs(to_double(a)(0, 0) * to_double(a)(1, 1) - to_double(a)(0, 1) * to_double(a)(1, 0)) >= 0.5) break;
    }
    for (auto& v : b) v = Number::rational(static_cast<std::int64_t>(rng.uniform() * 9.0) - 4, 2);
    const NumberMatrix ainv = *inverse_exact(a);
    std::vector<Number> back(2);
    for (std::size_t i = 0; i < 2; ++i) back[i] = -(ainv(i, 0) * b[0] + ainv(i, 1) * b[1]);
    const NumMatrix ad = to_double(a);

    const std::vector<std::pair<std::string, std::map<std::string, double>>> cases = {
        {"mvnormal", {{"alpha1", 0.5}, {"alpha2", -1}, {"sigma11", 1}, {"sigma22", 2}, {"sigma12", 0.5}}},
        {"multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}}},
    };
    for (const auto& [name, params] : cases) {
        FamilySpec f = builtin(name, params);
        FamilySpec g = affine(f, a, b);
        FamilySpec round = affine(g, ainv, back);
        MomentTable beta = central_moments(g, 2);
        for (const Bindings& pt : f.sample_points(8, opt.seed)) {
            const Vector x = f.mean_at(pt);
            Vector y(2);
            for (std::size_t i = 0; i < 2; ++i) y[i] = ad(i, 0) * x[0] + ad(i, 1) * x[1] + b[i].to_double();
            auto bv = evaluate_table_at(beta, y);
            const NumMatrix want = ad * f.variance_at(pt) * ad.transposed();
            t.close(bv.at(MultiIndex{2, 0}), want(0, 0), 1e-9, name + " beta_(2,0)");
            t.close(bv.at(MultiIndex{1, 1}), want(0, 1), 1e-9, name + " beta_(1,1)");
            t.close(bv.at(MultiIndex{0, 2}), want(1, 1), 1e-9, name + " beta_(0,2)");
            const NumMatrix vf = f.variance_at(pt);
            const NumMatrix vr = round.variance_at(round.bind_mean(x));
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) t.close(vr(i, j), vf(i, j), 1e-9, name + " round trip V");
        }
    }
    return t.summary("max relative error");
}

inline std::string c8_fisher(Tally& t, const Options& opt) {
    const std::map<std::string, std::map<std::string, double>> params = {
        {"binomial", {{"n", 5}, {"p", 0.3}}},
        {"poisson", {{"lambda", 2}}},
        {"negative_binomial", {{"n", 3}, {"p", 0.4}}},
        {"normal", {{"alpha", 0}, {"sigma2", 1}}},
        {"gamma", {{"alpha", 2}, {"lambda", 3}}},
        {"mvnormal", {{"alpha1", 0.5}, {"alpha2", -1}, {"sigma11", 1}, {"sigma22", 2}, {"sigma12", 0.5}}},
        {"multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}}},
        {"negative_multinomial", {{"n", 3}, {"p1", 0.2}, {"p2", 0.3}}},
        {"logarithmic", {{"theta", 0.4}}},
        {"mv_logarithmic", {{"theta1", 0.2}, {"theta2", 0.3}}},
        {"random_walk", {{"n", 2}, {"p", 0.8}}},
        {"borel_tanner", {{"n", 2}, {"alpha", 0.5}}},
    };
    for (const auto& name : builtin_names()) {
        FamilySpec f = builtin(name, params.at(name));
        for (const Bindings& pt : f.sample_points(3, opt.seed)) {
            const Vector x = f.mean_at(pt);
            const NumMatrix prod = fisher_info(f, x) * f.variance_at(f.bind_mean(x));
            for (std::size_t i = 0; i < f.dim; ++i)
                for (std::size_t j = 0; j < f.dim; ++j) t.absolute(prod(i, j), i == j ? 1.0 : 0.0, 1e-9, name + " I*V");
        }
    }
    const double fisher_worst = t.worst();
    std::ostringstream mc;
    const std::vector<std::tuple<std::string, oracle::Params, double>> score_cases = {
        {"poisson", {{"lambda", 2}}, 2.0},
        {"binomial", {{"n", 10}, {"p", 0.3}}, 3.0},
    };
    for (const auto& [name, p, x] : score_cases) {
        const std::vector<double> xv = {x};
        const double info = fisher_info(builtin(name, p), xv)(0, 0);
        oracle::ScoreEstimate est = oracle::score_covariance(name, p, xv, opt.mc_samples, opt.seed);
        const double z = (est.covariance(0, 0) - info) / est.standard_error(0, 0);
        t.check(std::fabs(z) <= 3.0, name + " score covariance " + Tally::fmt(est.covariance(0, 0)) + " vs " +
                                         Tally::fmt(info) + " (" + Tally::fmt(z) + " s.e.)");
        mc << "; " << name << " score " << Tally::fmt(est.covariance(0, 0)) << " vs " << Tally::fmt(info) << " ("
           << Tally::fmt(z) << " s.e.)";
    }
    return t.summary("max |I*V - Id|") + " (fisher " + Tally::fmt(fisher_worst) + ")" + mc.str();
}

inline std::string c9_poisson_tail(Tally& t, const Options&) {
    FamilySpec f = builtin("poisson", {{"lambda", 1}});
    ExponentResult a = exponent_A(f, 1.0, 2.0);
    t.absolute(a.value, 2 * std::log(2.0) - 1, 1e-8, "A(1,2)");
    DualResult d = dual_exponent(f, 1.0, 2.0);
    t.absolute(d.value, a.value, 1e-7, "dual vs A");
    const double bound = std::exp(-a.value);
    t.check(1 - 2 * std::exp(-1.0) <= bound, "exact tail above bound");
    for (double y : {1.5, 2.0, 3.0, 5.0}) {
        TailReport r = tail_bound(f, 1.0, y);
        t.check(r.oracle_tail.has_value(), "oracle tail missing at y=" + Tally::fmt(y));
        if (r.oracle_tail)
            t.check(*r.oracle_tail <= r.bound, "y=" + Tally::fmt(y) + ": tail " + Tally::fmt(*r.oracle_tail) +
                                                  " above bound " + Tally::fmt(r.bound));
    }
    return "A(1,2) = " + Tally::fmt(a.value) + ", dual " + Tally::fmt(d.value) + ", bound " + Tally::fmt(bound) +
           "; " + t.summary("max absolute error");
}

inline std::string c10_gaussian_tail(Tally& t, const Options&) {
    const double s2 = 2.0;
    const double x = 0.5;
    FamilySpec f = builtin("normal", {{"alpha", x}, {"sigma2", s2}});
    for (double y : {-2.0, -0.5, 1.0, 2.5, 4.0})
        t.absolute(exponent_A(f, x, y).value, (y - x) * (y - x) / (2 * s2), 1e-8, "y=" + Tally::fmt(y));
    return t.summary("max absolute error");
}

inline std::string c11_random_walk(Tally& t, const Options& opt) {
    FamilySpec f1 = builtin("random_walk", {{"n", 1}, {"p", 0.75}});
    EquivReport eq = equiv_report(f1.variance(0, 0), parse("x^3/n^2 - x"), f1.sample_points(32, opt.seed), 1e-12);
    t.check(eq.equivalent && eq.points_used > 0, "V differs from x^3/n^2 - x");
    const double sigma2 = evaluate_table_at(cumulants(f1, 2), std::vector<double>{2.0}).at(MultiIndex{2});
    t.close(sigma2, 6.0, 1e-12, "sigma_2 at n=1, p=0.75");
    for (unsigned n : {1u, 2u, 5u})
        for (double p : {0.6, 0.75, 0.9}) {
            FamilySpec f = builtin("random_walk", {{"n", double(n)}, {"p", p}});
            auto table = evaluate_table_at(cumulants(f, 8), f.reference_mean);
            for (unsigned k = 0; k + 2 <= 8; ++k)
                t.close(randomwalk_cumulant(n, p, k), table.at(MultiIndex{k + 2}), 1e-9,
                        "closed form n=" + std::to_string(n) + " p=" + Tally::fmt(p) + " k=" + std::to_string(k));
        }
    // Monte Carlo against the descriptor mean n/(2p-1) and variance V(x).
    const oracle::Params params = {{"n", 1}, {"p", 0.75}};
    auto draws = oracle::mc_sample("random_walk", params, opt.mc_samples, opt.seed);
    const double count = double(draws.size());
    double s1 = 0.0;
    for (std::size_t r = 0; r < draws.size(); ++r) s1 += draws(r, 0);
    const double mean = s1 / count;
    double m2 = 0.0;
    double m4 = 0.0;
    for (std::size_t r = 0; r < draws.size(); ++r) {
        const double d = draws(r, 0) - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= count;
    m4 /= count;
    const double want_mean = 2.0;
    const double want_var = 6.0;
    const double se_mean = std::sqrt(want_var / count);
    const double se_var = std::sqrt(std::max(m4 - m2 * m2, 0.0) / count);
    t.check(std::fabs(mean - want_mean) <= 4 * se_mean,
            "MC mean " + Tally::fmt(mean) + " vs 2 (s.e. " + Tally::fmt(se_mean) + ")");
    t.check(std::fabs(m2 - want_var) <= 4 * se_var,
            "MC variance " + Tally::fmt(m2) + " vs 6 (s.e. " + Tally::fmt(se_var) + ")");
    t.check(draws.cap_hits == 0, std::to_string(draws.cap_hits) + " draws hit the step cap");
    return t.summary("max relative error") + "; MC mean " + Tally::fmt(mean) + ", variance " + Tally::fmt(m2);
}

inline std::string c12_borel_tanner(Tally& t, const Options&) {
    for (auto [n, a] : {std::pair{1.0, 0.3}, std::pair{2.0, 0.5}}) {
        auto m = oracle::enumerate_moments("borel_tanner", {{"n", n}, {"alpha", a}}, 2);
        const double mean = m.at(MultiIndex{1});
        const std::string tag = "n=" + Tally::fmt(n) + " alpha=" + Tally::fmt(a);
        t.close(mean, n / (1 - a), 1e-8, tag + " mean");
        t.close(m.at(MultiIndex{2}) - mean * mean, n * a / std::pow(1 - a, 3), 1e-8, tag + " variance");
    }
    return t.summary("max relative error");
}

inline std::string c13_multinomial(Tally& t, const Options&) {
    const oracle::Params params = {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}};
    FamilySpec f = builtin("multinomial", params);
    auto rec = at_mean(raw_moments(f, 4), f.reference_mean);
    auto exact = oracle::enumerate_moments("multinomial", params, 4);
    for (const MultiIndex& k : indices_up_to(2, 4)) {
        if (k.order() == 0) continue;
        t.close(rec.at(k), exact.at(k), 1e-10, "a_" + k.str());
    }
    const auto pts = f.sample_points(16);
    t.check(equiv_numeric(raw_moment_along(f, {0, 1}), raw_moment_along(f, {1, 0}), pts, 1e-12),
            "a_(1,1) depends on the generation path");
    t.check(equiv_numeric(raw_moment_along(f, {0, 0, 1}), raw_moment_along(f, {1, 0, 0}), pts, 1e-12) &&
                equiv_numeric(raw_moment_along(f, {0, 1, 0}), raw_moment_along(f, {1, 0, 0}), pts, 1e-12),
            "a_(2,1) depends on the generation path");
    return t.summary("max relative error");
}

inline std::vector<Criterion> criteria() {
    return {
        {1, "Poisson cumulant flatness", 1, c1_poisson},
        {2, "Gamma cumulants closed form", 1, c2_gamma},
        {3, "Quadratic-V cumulant closed form", 5, c3_quadratic},
        {4, "Oracle raw-moment equivalence", 10, c4_oracle_moments},
        {5, "Laplace-transform residuals", 5, c5_residuals},
        {6, "Convolution cumulant additivity", 2, c6_additivity},
        {7, "Affine covariance and round trip", 2, c7_affine},
        {8, "Fisher information", 60, c8_fisher},
        {9, "Poisson tail bound", 2, c9_poisson_tail},
        {10, "Gaussian tail exponent", 1, c10_gaussian_tail},
        {11, "Random walk stack", 120, c11_random_walk},
        {12, "Borel-Tanner descriptor", 5, c12_borel_tanner},
        {13, "Multivariate recursion vs enumeration", 5, c13_multinomial},
    };
}

}  // namespace detail

inline std::size_t criterion_count() { return detail::criteria().size(); }

/// Runs one criterion. A criterion passes when all its checks pass within budget; an
/// exception counts as a failure with its message as the detail.
inline CriterionResult run_criterion(int id, const Options& opt = {}) {
    for (const auto& c : detail::criteria()) {
        if (c.id != id) continue;
        CriterionResult r;
        r.id = c.id;
        r.name = c.name;
        r.budget = c.budget;
        detail::Tally tally;
        const auto start = std::chrono::steady_clock::now();
        try {
            r.detail = c.body(tally, opt);
            r.pass = tally.pass();
        } catch (const std::exception& e) {
            r.detail = std::string("exception: ") + e.what();
            r.pass = false;
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (r.seconds > r.budget) {
            r.pass = false;
            r.detail += "; over budget (" + detail::Tally::fmt(r.seconds) + " s > " + detail::Tally::fmt(r.budget) + " s)";
        }
        return r;
    }
    throw ArgumentError("acceptance: no criterion " + std::to_string(id));
}

inline std::vector<CriterionResult> run_all(const Options& opt = {},
                                            const std::function<void(const CriterionResult&)>& on_result = {}) {
    std::vector<CriterionResult> out;
    for (const auto& c : detail::criteria()) {
        out.push_back(run_criterion(c.id, opt));
        if (on_result) on_result(out.back());
    }
    return out;
}

inline std::string format_line(const CriterionResult& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << " (" << detail::Tally::fmt(r.seconds)
       << " s of " << r.budget << " s): " << r.detail;
    return os.str();
}

}  // namespace classb::acceptance
