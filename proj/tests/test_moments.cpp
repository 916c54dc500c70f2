#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "classb/moments.hpp"
#include "classb/oracle.hpp"
#include "test_support.hpp"

namespace classb {
namespace {

using testing::default_family;
using testing::default_params;
using testing::rel_close;

TEST(MultiIndex, OrderAndArithmetic) {
    MultiIndex k{2, 1};
    EXPECT_EQ(k.order(), 3u);
    EXPECT_EQ(k.plus(1), (MultiIndex{2, 2}));
    EXPECT_EQ(k.minus(0), (MultiIndex{1, 1}));
    EXPECT_THROW(MultiIndex({0, 1}).minus(0), ArgumentError);
    EXPECT_EQ(MultiIndex({0, 3}).lead(), 1u);
    EXPECT_LT(MultiIndex({3, 0}), MultiIndex({0, 4}));
    EXPECT_LT(MultiIndex({0, 2}), MultiIndex({1, 1}));
    EXPECT_EQ(indices_up_to(2, 2).size(), 6u);
    EXPECT_EQ(indices_up_to(3, 4).size(), 35u);
}

TEST(RawMoments, PoissonExpressions) {
    FamilySpec f = builtin("poisson", {{"lambda", 2}});
    MomentTable t = raw_moments(f, 3);
    auto pts = f.sample_points(32);
    EXPECT_TRUE(t.at(1u).op() == Op::variable);
    EXPECT_TRUE(equiv_numeric(t.at(2u), parse("x + x^2"), pts, 1e-12));
    EXPECT_TRUE(equiv_numeric(t.at(3u), parse("x + 3*x^2 + x^3"), pts, 1e-12));
    auto v = evaluate_table(t, {{"x", 2.0}});
    EXPECT_EQ(v.at(MultiIndex{0}), 1.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{1}), 2.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{2}), 6.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{3}), 22.0);
    auto o = oracle::enumerate_moments("poisson", {{"lambda", 2}}, 3);
    for (unsigned k = 1; k <= 3; ++k) EXPECT_TRUE(rel_close(v.at(MultiIndex{k}), o.at(MultiIndex{k}), 1e-12));
}

TEST(RawMoments, SecondMomentIsVariancePlusSquare) {
    for (const auto& name : builtin_names()) {
        FamilySpec f = default_family(name);
        if (f.dim != 1) continue;
        MomentTable t = raw_moments(f, 2);
        Expr expected = f.variance(0, 0) + pow(Expr::var("x"), 2);
        EXPECT_TRUE(equiv_numeric(t.at(2u), expected, f.sample_points(16), 1e-12)) << name;
    }
}

TEST(RawMoments, MultinomialMixedMoment) {
    FamilySpec f = builtin("multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}});
    MomentTable t = raw_moments(f, 2);
    auto pts = f.sample_points(16);
    EXPECT_TRUE(equiv_numeric(t.at(MultiIndex{1, 1}), f.variance(0, 1) + parse("x1*x2"), pts, 1e-12));
    auto v = evaluate_table_at(t, f.reference_mean);
    EXPECT_NEAR(v.at(MultiIndex{1, 1}), 4 * 3 * 0.2 * 0.3, 1e-14);
    auto o = oracle::enumerate_moments("multinomial", default_params("multinomial"), 2);
    EXPECT_TRUE(rel_close(v.at(MultiIndex{1, 1}), o.at(MultiIndex{1, 1}), 1e-12));
}

TEST(RawMoments, GenerationPathIndependence) {
    for (const auto& name : {"multinomial", "negative_multinomial", "mvnormal", "mv_logarithmic"}) {
        FamilySpec f = default_family(name);
        auto pts = f.sample_points(8);
        EXPECT_TRUE(equiv_numeric(raw_moment_along(f, {0, 1}), raw_moment_along(f, {1, 0}), pts, 1e-10)) << name;
        Expr a = raw_moment_along(f, {0, 0, 1});
        EXPECT_TRUE(equiv_numeric(a, raw_moment_along(f, {0, 1, 0}), pts, 1e-10)) << name;
        EXPECT_TRUE(equiv_numeric(a, raw_moment_along(f, {1, 0, 0}), pts, 1e-10)) << name;
        EXPECT_TRUE(equiv_numeric(a, raw_moments(f, 3).at(MultiIndex{2, 1}), pts, 1e-10)) << name;
    }
}

TEST(RawMoments, SeedsAndClosure) {
    FamilySpec f = default_family("negative_multinomial");
    MomentTable t = raw_moments(f, 3);
    EXPECT_TRUE(t.at(MultiIndex{0, 0}).is_one());
    EXPECT_EQ(t.at(MultiIndex{1, 0}).name(), "x1");
    EXPECT_EQ(t.at(MultiIndex{0, 1}).name(), "x2");
    EXPECT_EQ(t.entries.size(), indices_up_to(2, 3).size());
    EXPECT_THROW(raw_moments(f, 0), ArgumentError);
    EXPECT_THROW(t.at(MultiIndex{4, 0}), ArgumentError);
}

TEST(CentralMoments, NormalConstantVariance) {
    FamilySpec f = builtin("normal", {{"alpha", 1}, {"sigma2", 2}});
    MomentTable t = central_moments(f, 6);
    auto v = evaluate_table(t, {{"x", 1.0}});
    EXPECT_EQ(v.at(MultiIndex{0}), 1.0);
    EXPECT_EQ(v.at(MultiIndex{1}), 0.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{2}), 2.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{3}), 0.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{4}), 12.0);
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{6}), 15.0 * 8.0);
    EXPECT_THROW(central_moments(f, 1), ArgumentError);
}

TEST(CentralMoments, BinomialThird) {
    FamilySpec f = builtin("binomial", {{"n", 5}, {"p", 0.3}});
    auto v = evaluate_table_at(central_moments(f, 3), std::vector<double>{1.5});
    EXPECT_NEAR(v.at(MultiIndex{3}), 0.42, 1e-14);
}

TEST(CentralFromRaw, LowOrderForms) {
    FamilySpec f = default_family("negative_binomial");
    MomentTable raw = raw_moments(f, 3);
    MomentTable c = central_from_raw(raw);
    auto pts = f.sample_points(16);
    const Expr& a1 = raw.at(1u);
    EXPECT_TRUE(equiv_numeric(c.at(2u), raw.at(2u) - pow(a1, 2), pts, 1e-12));
    EXPECT_TRUE(equiv_numeric(c.at(3u), raw.at(3u) - Expr::num(3) * raw.at(2u) * a1 + Expr::num(2) * pow(a1, 3), pts,
                              1e-12));
    EXPECT_THROW(central_from_raw(c), ArgumentError);
}

TEST(CentralFromRaw, BinomialFourthAgreesWithRecursion) {
    FamilySpec f = builtin("binomial", {{"n", 5}, {"p", 0.3}});
    auto a = evaluate_table_at(central_from_raw(raw_moments(f, 4)), std::vector<double>{1.5});
    auto b = evaluate_table_at(central_moments(f, 4), std::vector<double>{1.5});
    EXPECT_LE(std::fabs(a.at(MultiIndex{4}) - b.at(MultiIndex{4})), 1e-12);
}

TEST(CentralFromRaw, RouteEquivalenceForEveryBuiltin) {
    for (const auto& name : builtin_names()) {
        FamilySpec f = default_family(name);
        const unsigned K = f.dim == 1 ? 6 : 4;
        MomentTable direct = central_moments(f, K);
        MomentTable converted = central_from_raw(raw_moments(f, K));
        auto pts = f.sample_points(6);
        for (const auto& [k, e] : direct.entries)
            EXPECT_TRUE(equiv_numeric(e, converted.at(k), pts, 1e-9)) << name << " " << k.str();
    }
}

TEST(Cumulants, PoissonIsFlat) {
    FamilySpec f = builtin("poisson", {{"lambda", 2}});
    MomentTable t = cumulants(f, 10);
    for (unsigned k = 1; k <= 10; ++k) EXPECT_EQ(to_string(t.at(k)), "x") << k;
    EXPECT_EQ(t.entries.count(MultiIndex{0}), 0u);
}

TEST(Cumulants, GammaTable) {
    FamilySpec f = builtin("gamma", {{"alpha", 1}, {"lambda", 2}});
    auto v = evaluate_table_at(cumulants(f, 4), std::vector<double>{2.0});
    EXPECT_NEAR(v.at(MultiIndex{1}), 2.0, 1e-14);
    EXPECT_NEAR(v.at(MultiIndex{2}), 2.0, 1e-14);
    EXPECT_NEAR(v.at(MultiIndex{3}), 4.0, 1e-14);
    EXPECT_NEAR(v.at(MultiIndex{4}), 12.0, 1e-13);
    for (double rate : {0.5, 2.0}) {
        FamilySpec g = builtin("gamma", {{"alpha", rate}, {"lambda", 3}});
        auto w = evaluate_table_at(cumulants(g, 8), g.reference_mean);
        for (unsigned k = 1; k <= 8; ++k)
            EXPECT_TRUE(rel_close(w.at(MultiIndex{k}), std::tgamma(double(k)) * 3.0 * std::pow(rate, -double(k)), 1e-12));
    }
}

TEST(Cumulants, SecondAndThirdMatchCentral) {
    for (const auto& name : builtin_names()) {
        FamilySpec f = default_family(name);
        MomentTable s = cumulants(f, 3);
        MomentTable b = central_moments(f, 3);
        auto pts = f.sample_points(8);
        for (const auto& [k, e] : s.entries) {
            if (k.order() < 2) continue;
            EXPECT_TRUE(equiv_numeric(e, b.at(k), pts, 1e-9)) << name << " " << k.str();
        }
        if (f.dim == 1) EXPECT_TRUE(equiv_numeric(s.at(2u), f.variance(0, 0), pts, 1e-12)) << name;
    }
}

// Raw moments to order 6 against pmf summation or quadrature of the density.
TEST(Oracle, RawMomentsMatchExactComputation) {
    for (const auto& name : builtin_names()) {
        FamilySpec f = default_family(name);
        if (!f.verified || name == "mvnormal") continue;
        const unsigned K = f.dim == 1 ? 6 : 4;
        const double tol = (name == "normal" || name == "gamma") ? 1e-8 : 1e-9;
        auto mine = evaluate_table_at(raw_moments(f, K), f.reference_mean);
        auto truth = oracle::exact_moments(name, default_params(name), K);
        for (const auto& [k, v] : mine) EXPECT_TRUE(rel_close(v, truth.at(k), tol)) << name << " " << k.str();
    }
}

TEST(Oracle, EnumerationMassIsOne) {
    for (const auto& name : builtin_names()) {
        if (name == "normal" || name == "gamma" || name == "mvnormal") continue;
        FamilySpec f = default_family(name);
        if (!f.verified) continue;
        auto m = oracle::enumerate_moments(name, default_params(name), 1);
        EXPECT_NEAR(m.at(MultiIndex::zero(f.dim)), 1.0, 1e-13) << name;
    }
}

TEST(Evaluate, NeedsBindings) {
    FamilySpec f = from_variance({{"x*(a*x+b)"}}, {"x"}, {{"x", {0.1, 5.0}}}, {{"a", 0.5}, {"b", 1.0}});
    MomentTable t = cumulants(f, 3);
    EXPECT_THROW(evaluate_table(t, {}), EvalError);
    auto v = evaluate_table(t, {{"x", 2.0}});
    EXPECT_DOUBLE_EQ(v.at(MultiIndex{2}), 2.0 * (0.5 * 2.0 + 1.0));
    // Caller bindings take precedence over stored constants.
    auto w = evaluate_table(t, {{"x", 2.0}, {"a", 0.0}});
    EXPECT_DOUBLE_EQ(w.at(MultiIndex{2}), 2.0);
}

TEST(Cache, ExtendsAndTrims) {
    MomentCache cache;
    FamilySpec f = default_family("binomial");
    MomentTable small = cache.get(f, MomentKind::raw, 3);
    EXPECT_EQ(small.max_order, 3u);
    EXPECT_EQ(small.entries.size(), 4u);
    MomentTable big = cache.get(f, MomentKind::raw, 6);
    EXPECT_EQ(big.entries.size(), 7u);
    EXPECT_TRUE(big.at(3u).node() == small.at(3u).node());
    EXPECT_EQ(cache.get(f, MomentKind::raw, 2).entries.size(), 3u);
}

TEST(Cache, ConcurrentCallers) {
    MomentCache cache;
    FamilySpec f = default_family("negative_binomial");
    std::vector<std::thread> threads;
    std::vector<double> out(4);
    for (unsigned i = 0; i < 4; ++i)
        threads.emplace_back([&, i] {
            MomentTable t = cache.get(f, MomentKind::cumulant, 4 + i);
            out[i] = evaluate_table_at(t, f.reference_mean).at(MultiIndex{4});
        });
    for (auto& t : threads) t.join();
    for (unsigned i = 1; i < 4; ++i) EXPECT_EQ(out[i], out[0]);
}

TEST(MomentKind, Names) {
    EXPECT_EQ(parse_moment_kind("raw"), MomentKind::raw);
    EXPECT_EQ(parse_moment_kind("cumulants"), MomentKind::cumulant);
    EXPECT_EQ(to_string(MomentKind::central), "central");
    EXPECT_THROW(parse_moment_kind("moment"), ArgumentError);
}

}  // namespace
}  // namespace classb
