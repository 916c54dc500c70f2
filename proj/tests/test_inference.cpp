#include <gtest/gtest.h>

#include <cmath>

#include "classb/inference.hpp"
#include "classb/oracle.hpp"
#include "classb/transforms.hpp"
#include "test_support.hpp"

namespace classb {
namespace {

using testing::default_family;
using testing::default_params;
using testing::rel_close;

TEST(Fisher, InverseOfVarianceForEveryBuiltin) {
    for (const auto& name : builtin_names()) {
        FamilySpec f = default_family(name);
        for (const Bindings& pt : f.sample_points(3)) {
            const Vector x = f.mean_at(pt);
            NumMatrix prod = fisher_info(f, x) * f.variance_at(f.bind_mean(x));
            for (std::size_t i = 0; i < f.dim; ++i)
                for (std::size_t j = 0; j < f.dim; ++j)
                    EXPECT_NEAR(prod(i, j), i == j ? 1.0 : 0.0, 1e-9) << name << " (" << i << "," << j << ")";
        }
    }
}

TEST(Fisher, UnivariateExamples) {
    EXPECT_TRUE(rel_close(fisher_info(builtin("poisson", {{"lambda", 2}}), {2.0})(0, 0), 0.5, 1e-15));
    EXPECT_TRUE(rel_close(fisher_info(builtin("normal", {{"alpha", 0}, {"sigma2", 1}}), {0.3})(0, 0), 1.0, 1e-15));
    // Binomial: 1 / (x (1 - x/n)) at n = 10, x = 3.
    EXPECT_TRUE(rel_close(fisher_info(builtin("binomial", {{"n", 10}, {"p", 0.3}}), {3.0})(0, 0), 1.0 / 2.1, 1e-14));
}

TEST(Fisher, MultinomialClosedForm) {
    // Inverse of diag(x) - x x^T / n is diag(1/x) + 1/(n - x1 - x2).
    FamilySpec f = builtin("multinomial", {{"n", 6}, {"p1", 0.2}, {"p2", 0.3}});
    const double x1 = 1.5;
    const double x2 = 2.0;
    NumMatrix info = fisher_info(f, {x1, x2});
    const double rest = 1.0 / (6.0 - x1 - x2);
    EXPECT_TRUE(rel_close(info(0, 0), 1 / x1 + rest, 1e-13));
    EXPECT_TRUE(rel_close(info(1, 1), 1 / x2 + rest, 1e-13));
    EXPECT_TRUE(rel_close(info(0, 1), rest, 1e-13));
    EXPECT_EQ(info(0, 1), info(1, 0));
}

TEST(Fisher, ReportsConditionNumber) {
    FisherResult r = fisher_info_report(default_family("mvnormal"), std::vector<double>{0.0, 0.0});
    EXPECT_GT(r.condition, 1.0);
    EXPECT_LT(r.condition, 10.0);
}

TEST(Fisher, OutsideDomainThrows) {
    EXPECT_THROW(fisher_info(builtin("poisson", {{"lambda", 2}}), {-1.0}), NumericalError);
    EXPECT_THROW(fisher_info(default_family("multinomial"), {1.0}), ArgumentError);
}

TEST(Fisher, SymbolicMatchesNumeric) {
    for (const auto& name : {"poisson", "gamma", "multinomial", "negative_multinomial", "mvnormal", "mv_logarithmic"}) {
        FamilySpec f = default_family(name);
        ExprMatrix sym = fisher_info_symbolic(f);
        for (const Bindings& pt : f.sample_points(8)) {
            NumMatrix num = fisher_info(f, f.mean_at(pt));
            for (std::size_t i = 0; i < f.dim; ++i)
                for (std::size_t j = 0; j < f.dim; ++j)
                    EXPECT_TRUE(rel_close(eval(sym(i, j), pt), num(i, j), 1e-10, 1e-12)) << name;
        }
    }
}

TEST(Fisher, SymbolicDimensionLimit) {
    FamilySpec f = builtin("multinomial", {{"n", 10}, {"p1", 0.1}, {"p2", 0.1}, {"p3", 0.1}, {"p4", 0.1}});
    ASSERT_EQ(f.dim, 4u);
    EXPECT_THROW(fisher_info_symbolic(f), ArgumentError);
    EXPECT_NO_THROW(fisher_info(f, f.reference_mean));
}

TEST(Fisher, InformationAdditivity) {
    for (const auto& name : {"poisson", "binomial", "gamma", "multinomial"}) {
        FamilySpec f = default_family(name);
        for (std::int64_t n : {2, 7}) {
            FamilySpec g = sample_mean(f, n);
            NumMatrix one = fisher_info(f, f.reference_mean);
            NumMatrix many = fisher_info(g, f.reference_mean);
            for (std::size_t i = 0; i < f.dim; ++i)
                for (std::size_t j = 0; j < f.dim; ++j)
                    EXPECT_TRUE(rel_close(many(i, j), double(n) * one(i, j), 1e-12)) << name << " n=" << n;
        }
    }
}

// Score covariance in the mean parametrization: a Monte Carlo estimate of V^{-1}.
void expect_score_matches(const std::string& name, const oracle::Params& params, std::vector<double> x,
                          std::size_t count) {
    FamilySpec f = builtin(name, params);
    NumMatrix info = fisher_info(f, x);
    oracle::ScoreEstimate est = oracle::score_covariance(name, params, x, count);
    EXPECT_EQ(est.samples, count);
    for (std::size_t i = 0; i < f.dim; ++i)
        for (std::size_t j = 0; j < f.dim; ++j)
            EXPECT_LE(std::fabs(est.covariance(i, j) - info(i, j)), 3.0 * est.standard_error(i, j))
                << name << " (" << i << "," << j << ") " << est.covariance(i, j) << " vs " << info(i, j);
}

TEST(Score, PoissonMonteCarlo) { expect_score_matches("poisson", {{"lambda", 2}}, {2.0}, 200000); }

TEST(Score, BinomialMonteCarlo) { expect_score_matches("binomial", {{"n", 10}, {"p", 0.3}}, {3.0}, 200000); }

TEST(Score, GammaMonteCarlo) { expect_score_matches("gamma", {{"alpha", 2}, {"lambda", 3}}, {1.5}, 200000); }

TEST(Score, MultinomialMonteCarlo) {
    expect_score_matches("multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}}, {0.8, 1.2}, 200000);
}

}  // namespace
}  // namespace classb
