#include <gtest/gtest.h>

#include <cmath>

#include "classb/oracle.hpp"
#include "classb/tails.hpp"
#include "classb/transforms.hpp"
#include "test_support.hpp"

namespace classb {
namespace {

using testing::default_family;
using testing::rel_close;

TEST(ExponentA, PoissonClosedForm) {
    FamilySpec f = builtin("poisson", {{"lambda", 1}});
    // A(y) = y ln(y/x) - (y - x).
    for (double y : {1.5, 2.0, 3.0, 5.0}) {
        ExponentResult a = exponent_A(f, 1.0, y);
        EXPECT_NEAR(a.value, y * std::log(y) - (y - 1.0), 1e-10) << y;
        EXPECT_LE(a.error, 1e-10);
    }
    EXPECT_NEAR(exponent_A(f, 1.0, 2.0).value, 2 * std::log(2.0) - 1, 1e-8);
}

TEST(ExponentA, GaussianQuadraticForm) {
    FamilySpec f = builtin("normal", {{"alpha", 0}, {"sigma2", 2}});
    for (double y : {-3.0, -0.5, 0.0, 1.0, 4.0}) EXPECT_NEAR(exponent_A(f, 1.0, y).value, (y - 1) * (y - 1) / 4.0, 1e-12);
}

TEST(ExponentA, ZeroAtTheMean) {
    for (const auto& name : {"poisson", "binomial", "gamma", "logarithmic"}) {
        FamilySpec f = default_family(name);
        EXPECT_EQ(exponent_A(f, f.reference_mean[0], f.reference_mean[0]).value, 0.0) << name;
    }
}

TEST(ExponentA, IncreasesAwayFromTheMean) {
    for (const auto& name : {"poisson", "binomial", "negative_binomial", "gamma", "random_walk", "borel_tanner"}) {
        FamilySpec f = default_family(name);
        const double x = f.reference_mean[0];
        double previous = 0.0;
        for (double step : {0.05, 0.1, 0.2, 0.3}) {
            const double a = exponent_A(f, x, x * (1 + step)).value;
            EXPECT_GT(a, previous) << name;
            previous = a;
        }
    }
}

TEST(ExponentA, SecondOrderBehaviour) {
    // A(x + h) ~ h^2 / (2 V(x)) for small h.
    for (const auto& name : {"poisson", "binomial", "gamma", "logarithmic"}) {
        FamilySpec f = default_family(name);
        const double x = f.reference_mean[0];
        const double v = eval(f.variance(0, 0), f.bind_mean({x}));
        const double h = 1e-3 * x;
        EXPECT_TRUE(rel_close(exponent_A(f, x, x + h).value, h * h / (2 * v), 2e-3)) << name;
    }
}

TEST(ExponentA, QuadratureConvergence) {
    FamilySpec f = builtin("binomial", {{"n", 10}, {"p", 0.3}});
    const double x = 3.0;
    const double y = 6.0;
    const double coarse = exponent_A(f, std::vector<double>{x}, std::vector<double>{y}, 32).value;
    const double fine = exponent_A(f, std::vector<double>{x}, std::vector<double>{y}, 64).value;
    EXPECT_NEAR(coarse, fine, 1e-10);
}

TEST(ExponentA, Multivariate) {
    // Independent Poisson coordinates: A adds up across coordinates.
    FamilySpec f = from_variance({{"x1", "0"}, {"0", "x2"}}, {"x1", "x2"}, {{"x1", {0.1, 10}}, {"x2", {0.1, 10}}});
    const std::vector<double> x = {1.0, 2.0};
    const std::vector<double> y = {2.0, 3.0};
    auto rate = [](double a, double b) { return b * std::log(b / a) - (b - a); };
    EXPECT_NEAR(exponent_A(f, x, y).value, rate(1, 2) + rate(2, 3), 1e-10);
    FamilySpec mvn = default_family("mvnormal");
    NumMatrix inv = LU(mvn.variance_at(mvn.bind_mean(mvn.reference_mean))).inverse();
    const std::vector<double> d = {0.7, -0.4};
    std::vector<double> ty = {mvn.reference_mean[0] + d[0], mvn.reference_mean[1] + d[1]};
    double quad = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) quad += d[i] * inv(i, j) * d[j];
    EXPECT_NEAR(exponent_A(mvn, mvn.reference_mean, ty).value, quad / 2, 1e-12);
}

TEST(ExponentA, OutsideDomainThrows) {
    FamilySpec f = builtin("poisson", {{"lambda", 1}});
    EXPECT_THROW(exponent_A(f, 1.0, -1.0), NumericalError);
}

TEST(Dual, PoissonMaximizer) {
    DualResult d = dual_exponent(builtin("poisson", {{"lambda", 1}}), 1.0, 2.0);
    EXPECT_NEAR(d.value, 2 * std::log(2.0) - 1, 1e-10);
    EXPECT_NEAR(d.maximizer, std::log(2.0), 1e-8);
}

TEST(Dual, NormalMaximizer) {
    DualResult d = dual_exponent(builtin("normal", {{"alpha", 0}, {"sigma2", 1}}), 0.0, 3.0);
    EXPECT_NEAR(d.value, 4.5, 1e-10);
    EXPECT_NEAR(d.maximizer, 3.0, 1e-8);
}

TEST(Dual, AgreesWithExponentAOnAGrid) {
    for (const auto& name : {"poisson", "binomial", "negative_binomial", "normal", "gamma", "logarithmic", "random_walk"}) {
        FamilySpec f = default_family(name);
        const double x = f.reference_mean[0];
        for (double step : {0.1, 0.25, 0.5, 0.75, 1.0}) {
            double y = x * (1 + step);
            if (name == std::string("binomial")) y = x + step * (5.0 - x) * 0.9;
            if (name == std::string("normal")) y = x + step * 3;
            EXPECT_NEAR(dual_exponent(f, x, y).value, exponent_A(f, x, y).value, 1e-7) << name << " y=" << y;
        }
    }
}

TEST(TailBound, PoissonExample) {
    TailReport r = tail_bound(builtin("poisson", {{"lambda", 1}}), 1.0, 2.0);
    EXPECT_NEAR(r.bound, 0.6796, 5e-5);
    EXPECT_DOUBLE_EQ(r.bound, std::exp(-r.exponent_A));
    ASSERT_TRUE(r.oracle_tail);
    EXPECT_NEAR(*r.oracle_tail, 1 - 2 * std::exp(-1.0), 1e-12);
    ASSERT_TRUE(r.dual_exponent);
    EXPECT_NEAR(*r.dual_exponent, r.exponent_A, 1e-7);
    EXPECT_EQ(r.applicable, Applicability::yes);
    EXPECT_TRUE(r.notes.empty());
}

TEST(TailBound, BinomialExample) {
    TailReport r = tail_bound(builtin("binomial", {{"n", 10}, {"p", 0.3}}), 3.0, 6.0);
    ASSERT_TRUE(r.oracle_tail);
    double tail = 0.0;
    for (int k = 6; k <= 10; ++k) tail += std::exp(oracle::detail::log_choose(10, k) + k * std::log(0.3) + (10 - k) * std::log(0.7));
    EXPECT_NEAR(*r.oracle_tail, tail, 1e-14);
    EXPECT_LE(*r.oracle_tail, r.bound);
}

TEST(TailBound, BelowTheMeanIsNotCovered) {
    TailReport r = tail_bound(builtin("poisson", {{"lambda", 3}}), 3.0, 1.0);
    EXPECT_EQ(r.applicable, Applicability::no);
    EXPECT_GT(r.exponent_A, 0.0);
}

TEST(TailBound, BoundDominatesExactTail) {
    for (const auto& name : {"poisson", "binomial", "negative_binomial", "logarithmic", "random_walk", "borel_tanner", "normal", "gamma"}) {
        FamilySpec f = default_family(name);
        for (const Bindings& pt : f.sample_points(3)) {
            const double x = f.mean_at(pt)[0];
            for (double step : {0.0, 0.2, 0.5, 1.0}) {
                double y = x * (1 + step);
                if (name == std::string("binomial")) y = x + step * (5.0 - x) * 0.95;
                if (name == std::string("normal")) y = x + 2 * step;
                TailReport r = tail_bound(f, x, y);
                ASSERT_TRUE(r.oracle_tail) << name;
                EXPECT_LE(*r.oracle_tail, r.bound + 1e-12) << name << " x=" << x << " y=" << y;
                EXPECT_GT(r.bound, 0.0);
                EXPECT_LE(r.bound, 1.0);
            }
        }
    }
}

TEST(TailBound, MultivariateApplicability) {
    FamilySpec f = default_family("multinomial");
    const std::vector<double> x = f.reference_mean;
    EXPECT_EQ(tail_applicability(f, x, std::vector<double>{x[0] + 0.5, x[1] + 0.5}), Applicability::yes);
    EXPECT_EQ(tail_applicability(f, x, std::vector<double>{x[0] - 0.3, x[1] + 0.1}), Applicability::no);
    FamilySpec bare = from_variance({{"x1", "0"}, {"0", "x2"}}, {"x1", "x2"}, {{"x1", {0.1, 10}}, {"x2", {0.1, 10}}});
    EXPECT_EQ(tail_applicability(bare, std::vector<double>{1, 1}, std::vector<double>{2, 2}), Applicability::unknown);
    TailReport r = tail_bound(f, x, std::vector<double>{x[0] + 0.5, x[1] + 0.5});
    EXPECT_FALSE(r.dual_exponent);
    EXPECT_FALSE(r.oracle_tail);
}

TEST(TailBound, TransformedFamilyKeepsDual) {
    FamilySpec g = convolve_iid(builtin("poisson", {{"lambda", 1}}), 3);
    TailReport r = tail_bound(g, 3.0, 5.0);
    ASSERT_TRUE(r.dual_exponent);
    EXPECT_NEAR(*r.dual_exponent, 5 * std::log(5.0 / 3.0) - 2, 1e-9);
    EXPECT_NEAR(r.exponent_A, *r.dual_exponent, 1e-7);
}

}  // namespace
}  // namespace classb
