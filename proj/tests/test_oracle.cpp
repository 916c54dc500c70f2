#include <gtest/gtest.h>

#include <cmath>

#include "classb/oracle.hpp"
#include "test_support.hpp"

namespace classb {
namespace {

using testing::default_params;
using testing::rel_close;

TEST(Enumerate, PoissonRawMoments) {
    auto m = oracle::enumerate_moments("poisson", {{"lambda", 2}}, 3);
    EXPECT_NEAR(m.at(MultiIndex{0}), 1.0, 1e-13);
    EXPECT_NEAR(m.at(MultiIndex{1}), 2.0, 1e-12);
    EXPECT_NEAR(m.at(MultiIndex{2}), 6.0, 1e-12);
    // E xi^3 = lambda^3 + 3 lambda^2 + lambda.
    EXPECT_NEAR(m.at(MultiIndex{3}), 22.0, 1e-11);
}

TEST(Enumerate, BorelTannerMean) {
    auto m = oracle::enumerate_moments("borel_tanner", {{"n", 1}, {"alpha", 0.3}}, 1);
    EXPECT_NEAR(m.at(MultiIndex{1}), 1.0 / 0.7, 1e-10);
}

TEST(Enumerate, BorelTannerDescriptor) {
    for (auto [n, a] : {std::pair{1.0, 0.3}, std::pair{2.0, 0.5}}) {
        auto m = oracle::enumerate_moments("borel_tanner", {{"n", n}, {"alpha", a}}, 2);
        const double mean = m.at(MultiIndex{1});
        EXPECT_TRUE(rel_close(mean, n / (1 - a), 1e-8));
        EXPECT_TRUE(rel_close(m.at(MultiIndex{2}) - mean * mean, n * a / std::pow(1 - a, 3), 1e-8));
    }
}

TEST(Enumerate, MassSumsToOne) {
    for (const auto& name : {"binomial", "poisson", "negative_binomial", "logarithmic", "random_walk", "borel_tanner",
                             "multinomial", "negative_multinomial", "mv_logarithmic"}) {
        auto m = oracle::enumerate_moments(name, default_params(name), 1);
        const std::size_t dim = m.begin()->first.dim();
        EXPECT_NEAR(m.at(MultiIndex(std::vector<unsigned>(dim, 0))), 1.0, 1e-12) << name;
    }
}

TEST(Enumerate, BinomialIsExact) {
    auto m = oracle::enumerate_moments("binomial", {{"n", 5}, {"p", 0.3}}, 2);
    EXPECT_NEAR(m.at(MultiIndex{1}), 1.5, 1e-14);
    EXPECT_NEAR(m.at(MultiIndex{2}), 1.05 + 2.25, 1e-14);
}

TEST(Enumerate, RejectsContinuousFamilies) {
    EXPECT_THROW(oracle::enumerate_moments("normal", default_params("normal"), 2), ArgumentError);
    EXPECT_THROW(oracle::enumerate_moments("nope", {}, 2), ArgumentError);
}

TEST(Quadrature, NormalAndGamma) {
    auto n = oracle::quadrature_moments("normal", {{"alpha", 0}, {"sigma2", 1}}, 6);
    EXPECT_NEAR(n.at(MultiIndex{4}), 3.0, 1e-10);
    EXPECT_NEAR(n.at(MultiIndex{6}), 15.0, 1e-9);
    // Gamma rate alpha = 3, shape lambda = 2: E xi^k = lambda (lambda+1)...(lambda+k-1) / alpha^k.
    auto g = oracle::quadrature_moments("gamma", {{"alpha", 3}, {"lambda", 2}}, 3);
    EXPECT_TRUE(rel_close(g.at(MultiIndex{1}), 2.0 / 3.0, 1e-10));
    EXPECT_TRUE(rel_close(g.at(MultiIndex{3}), 2.0 * 3 * 4 / 27, 1e-10));
}

TEST(Quadrature, MultivariateNormal) {
    auto m = oracle::quadrature_moments("mvnormal", default_params("mvnormal"), 4);
    // alpha = (0.5, -1), sigma = ((1, 0.5), (0.5, 2)).
    EXPECT_NEAR(m.at(MultiIndex{0, 0}), 1.0, 1e-12);
    EXPECT_NEAR(m.at(MultiIndex{1, 1}), 0.5 - 0.5, 1e-12);
    EXPECT_NEAR(m.at(MultiIndex{0, 2}), 2.0 + 1.0, 1e-12);
    // E xi2^4 = mu^4 + 6 mu^2 s + 3 s^2.
    EXPECT_NEAR(m.at(MultiIndex{0, 4}), 1.0 + 12.0 + 12.0, 1e-10);
}

TEST(ExactTail, Examples) {
    EXPECT_NEAR(oracle::exact_tail("poisson", {{"lambda", 1}}, 2.0), 1 - 2 * std::exp(-1.0), 1e-14);
    EXPECT_NEAR(oracle::exact_tail("poisson", {{"lambda", 1}}, 1.5), 1 - 2 * std::exp(-1.0), 1e-14);
    EXPECT_EQ(oracle::exact_tail("poisson", {{"lambda", 1}}, 0.0), 1.0);
    EXPECT_EQ(oracle::exact_tail("binomial", {{"n", 5}, {"p", 0.3}}, 6.0), 0.0);
    EXPECT_NEAR(oracle::exact_tail("normal", {{"alpha", 0}, {"sigma2", 1}}, 0.0), 0.5, 1e-15);
    EXPECT_NEAR(oracle::exact_tail("gamma", {{"alpha", 1}, {"lambda", 1}}, 2.0), std::exp(-2.0), 1e-14);
    // Random walk from n = 1 lives on odd integers; a tail from 2 starts at 3.
    EXPECT_NEAR(oracle::exact_tail("random_walk", {{"n", 1}, {"p", 0.8}}, 2.0),
                oracle::exact_tail("random_walk", {{"n", 1}, {"p", 0.8}}, 3.0), 1e-15);
}

TEST(ParamsAtMean, RoundTrip) {
    const std::vector<double> x = {2.5};
    EXPECT_NEAR(oracle::params_at_mean("poisson", {{"lambda", 1}}, x).at("lambda"), 2.5, 1e-15);
    EXPECT_NEAR(oracle::params_at_mean("binomial", {{"n", 5}, {"p", 0.3}}, x).at("p"), 0.5, 1e-15);
    auto lg = oracle::params_at_mean("logarithmic", {{"theta", 0.4}}, x);
    const double t = lg.at("theta");
    EXPECT_NEAR(-t / ((1 - t) * std::log(1 - t)), 2.5, 1e-10);
    EXPECT_THROW(oracle::params_at_mean("poisson", {{"lambda", 1}}, std::vector<double>{1, 2}), ArgumentError);
}

TEST(LogDensity, Normalized) {
    double total = 0.0;
    for (int k = 0; k <= 5; ++k) total += std::exp(oracle::log_density("binomial", {{"n", 5}, {"p", 0.3}}, std::vector<double>{double(k)}));
    EXPECT_NEAR(total, 1.0, 1e-14);
    EXPECT_NEAR(oracle::log_density("normal", {{"alpha", 0}, {"sigma2", 1}}, std::vector<double>{0.0}),
                -0.5 * std::log(2 * M_PI), 1e-14);
}

TEST(Sampler, Deterministic) {
    auto a = oracle::mc_sample("poisson", {{"lambda", 2}}, 1000, 7);
    auto b = oracle::mc_sample("poisson", {{"lambda", 2}}, 1000, 7);
    auto c = oracle::mc_sample("poisson", {{"lambda", 2}}, 1000, 8);
    EXPECT_EQ(a.data, b.data);
    EXPECT_NE(a.data, c.data);
}

// Raw moments k <= 3 of each sampler within 4 standard errors of the exact moments.
TEST(Sampler, MomentsAgreeWithExactMoments) {
    const std::size_t count = 200000;
    for (const auto& name : builtin_names()) {
        const auto params = default_params(name);
        auto exact = oracle::exact_moments(name, params, 6);
        auto draws = oracle::mc_sample(name, params, count);
        ASSERT_EQ(draws.size() + draws.cap_hits, count) << name;
        const std::size_t dim = draws.dim;
        for (const auto& [k, value] : exact) {
            if (k.order() == 0 || k.order() > 3) continue;
            double sum = 0.0;
            double sum2 = 0.0;
            for (std::size_t r = 0; r < draws.size(); ++r) {
                double term = 1.0;
                for (std::size_t i = 0; i < dim; ++i) term *= std::pow(draws(r, i), k[i]);
                sum += term;
                sum2 += term * term;
            }
            const double n = double(draws.size());
            const double mean = sum / n;
            // Standard error from the exact moment of twice the order.
            std::vector<unsigned> doubled = k.entries();
            for (unsigned& e : doubled) e *= 2;
            const MultiIndex twice(doubled);
            const double var = exact.count(twice) ? exact.at(twice) - value * value : sum2 / n - mean * mean;
            const double se = std::sqrt(var / n);
            EXPECT_LE(std::fabs(mean - value), 4 * se) << name << " " << k.str() << ": " << mean << " vs " << value;
        }
    }
}

TEST(Sampler, BorelTannerMean) {
    auto draws = oracle::mc_sample("borel_tanner", {{"n", 1}, {"alpha", 0.5}}, 200000);
    double sum = 0.0;
    for (std::size_t r = 0; r < draws.size(); ++r) sum += draws(r, 0);
    const double se = std::sqrt(0.5 / std::pow(0.5, 3) / double(draws.size()));
    EXPECT_NEAR(sum / double(draws.size()), 2.0, 4 * se);
}

TEST(Sampler, RejectsBadInput) {
    EXPECT_THROW(oracle::mc_sample("poisson", {{"lambda", -1}}, 10), ArgumentError);
    EXPECT_THROW(oracle::mc_sample("unknown", {}, 10), ArgumentError);
}

}  // namespace
}  // namespace classb
