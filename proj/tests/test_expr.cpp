#include <gtest/gtest.h>

#include <cmath>

#include "classb/calculus.hpp"
#include "classb/eval.hpp"
#include "classb/parser.hpp"

namespace classb {
namespace {

TEST(Parse, ProductOfDifference) {
    Expr e = parse("x*(1-x/n)");
    ASSERT_EQ(e.op(), Op::mul);
    EXPECT_EQ(e.lhs().op(), Op::variable);
    EXPECT_EQ(e.lhs().name(), "x");
    const Expr& d = e.rhs();
    ASSERT_EQ(d.op(), Op::sub);
    EXPECT_TRUE(d.lhs().is_one());
    ASSERT_EQ(d.rhs().op(), Op::div);
    EXPECT_EQ(d.rhs().lhs().name(), "x");
    EXPECT_EQ(d.rhs().rhs().name(), "n");
}

TEST(Parse, PowerZeroFoldsToOne) {
    Expr e = parse("x^0");
    ASSERT_TRUE(e.is_constant());
    EXPECT_TRUE(e.value().is_one());
}

TEST(Parse, UnclosedCallReportsOffset) {
    try {
        parse("log(1-t/x");
        FAIL() << "expected a syntax error";
    } catch (const ParseError& err) {
        EXPECT_EQ(err.offset(), 9u);
        ASSERT_EQ(err.expected().size(), 1u);
        EXPECT_EQ(err.expected()[0], ")");
    }
}

TEST(Parse, StrayOperatorReportsOffset) {
    try {
        parse("log(1-t)/*x");
        FAIL() << "expected a syntax error";
    } catch (const ParseError& err) {
        EXPECT_EQ(err.offset(), 9u);
    }
}

TEST(Parse, UnknownFunction) {
    try {
        parse("2*foo(x)");
        FAIL() << "expected a parse error";
    } catch (const ParseError& err) {
        EXPECT_EQ(err.offset(), 2u);
        EXPECT_NE(std::string(err.what()).find("foo"), std::string::npos);
    }
}

TEST(Parse, PrecedenceAndAssociativity) {
    Bindings b{{"a", 2.0}, {"b", 3.0}, {"c", 2.0}, {"x", 3.0}};
    EXPECT_DOUBLE_EQ(eval(parse("a^b^c"), b), std::pow(2.0, 9.0));  // right-associative
    EXPECT_DOUBLE_EQ(eval(parse("-x^2"), b), -9.0);                  // minus looser than ^
    EXPECT_DOUBLE_EQ(eval(parse("2^-1"), b), 0.5);
    EXPECT_DOUBLE_EQ(eval(parse("a - b - c"), b), -3.0);
    EXPECT_DOUBLE_EQ(eval(parse("a / b * c"), b), 4.0 / 3.0);
}

TEST(Parse, DecimalsAreExact) {
    Expr e = parse("2.5 + 1e-3");
    ASSERT_TRUE(e.is_constant());
    EXPECT_TRUE(e.value().is_exact());
    EXPECT_EQ(e.value().numerator(), 2501);
    EXPECT_EQ(e.value().denominator(), 1000);
}

TEST(Fold, ConstantSubtreesCollapse) {
    Expr e = parse("(1/3 + 2/3)*x + 0*y - 0");
    EXPECT_EQ(e.op(), Op::variable);
    Expr r = parse("exp(0)");
    EXPECT_TRUE(r.is_one());
    EXPECT_TRUE(parse("sqrt(9/4)").value() == Number::rational(3, 2));
}

TEST(Diff, PowerRule) {
    Expr d = diff(parse("x^2"), "x");
    EXPECT_TRUE(equiv_numeric(d, parse("2*x"), Box{{"x", {-5, 5}}}, 16, 1e-14));
}

TEST(Diff, ProductRule) {
    Expr d = diff(parse("x*(a*x+b)"), "x");
    EXPECT_TRUE(equiv_numeric(d, parse("2*a*x+b"), Box{{"x", {-5, 5}}, {"a", {-2, 2}}, {"b", {-2, 2}}}, 32, 1e-13));
}

TEST(Diff, ChainRule) {
    Expr d = diff(parse("log(1-x)"), "x");
    EXPECT_TRUE(equiv_numeric(d, parse("-1/(1-x)"), Box{{"x", {-3, 0.9}}}, 32, 1e-13));
}

TEST(Diff, OtherVariablesAreConstants) {
    EXPECT_TRUE(diff(parse("n^2*exp(a)"), "x").is_zero());
    Expr d = diff(parse("x^n"), "x");
    EXPECT_TRUE(equiv_numeric(d, parse("n*x^(n-1)"), Box{{"x", {0.5, 3}}, {"n", {1, 4}}}, 32, 1e-12));
}

TEST(Eval, Arithmetic) {
    EXPECT_NEAR(eval(parse("x*(1-x/n)"), {{"x", 1.5}, {"n", 5}}), 1.05, 1e-15);
    EXPECT_EQ(eval(parse("exp(0)"), {}), 1.0);
}

TEST(Eval, DomainErrorsNameTheSubtree) {
    try {
        eval(parse("1 + log(x)"), {{"x", 0.0}});
        FAIL() << "expected a domain error";
    } catch (const EvalError& err) {
        EXPECT_EQ(err.kind(), EvalError::Kind::domain);
        EXPECT_EQ(err.subtree(), "log(x)");
    }
    EXPECT_THROW(eval(parse("1/(x-1)"), {{"x", 1.0}}), EvalError);
    EXPECT_THROW(eval(parse("sqrt(x)"), {{"x", -1.0}}), EvalError);
}

TEST(Eval, UnboundVariable) {
    try {
        eval(parse("x + y"), {{"x", 1.0}});
        FAIL();
    } catch (const EvalError& err) {
        EXPECT_EQ(err.kind(), EvalError::Kind::unbound_variable);
        EXPECT_EQ(err.subtree(), "y");
    }
}

TEST(Equiv, AlgebraicIdentity) {
    EXPECT_TRUE(equiv_numeric(parse("(x+1)^2"), parse("x^2+2*x+1"), Box{{"x", {0, 10}}}, 32, 1e-10));
    EXPECT_FALSE(equiv_numeric(parse("x"), parse("x+1e-3"), Box{{"x", {0, 1}}}, 32, 1e-10));
}

TEST(Equiv, AllPointsOutOfDomain) {
    EXPECT_THROW(equiv_numeric(parse("log(x)"), parse("x"), Box{{"x", {-2, -1}}}, 8, 1e-10), NumericalError);
    EXPECT_THROW(equiv_numeric(parse("x"), parse("x"), Box{{"x", {1, 1}}}, 8, 1e-10), ArgumentError);
}

// ---- properties -------------------------------------------------------------

// Small seeded generator of random expression trees over x and y.
class ExprGen {
  public:
    explicit ExprGen(std::uint64_t seed) : rng_(seed) {}

    Expr operator()(int depth) {
        double u = rng_.uniform();
        if (depth == 0 || u < 0.2) {
            double v = rng_.uniform();
            if (v < 0.4) return Expr::var("x");
            if (v < 0.6) return Expr::var("y");
            return Expr(Number::rational(static_cast<std::int64_t>(rng_.next() % 7) + 1,
                                         static_cast<std::int64_t>(rng_.next() % 3) + 1));
        }
        switch (rng_.next() % 9) {
            case 0: return (*this)(depth - 1) + (*this)(depth - 1);
            case 1: return (*this)(depth - 1) - (*this)(depth - 1);
            case 2: return (*this)(depth - 1) * (*this)(depth - 1);
            case 3: return (*this)(depth - 1) / (Expr::num(2) + pow((*this)(depth - 1), 2));
            case 4: return pow((*this)(depth - 1), static_cast<std::int64_t>(rng_.next() % 4));
            case 5: return exp((*this)(depth - 1) / Expr::num(4));
            case 6: return log(Expr::num(1) + pow((*this)(depth - 1), 2));
            case 7: return sqrt(Expr::num(1) + pow((*this)(depth - 1), 2));
            default: return -(*this)(depth - 1);
        }
    }

  private:
    Xoshiro256 rng_;
};

TEST(Properties, DiffMatchesCentralDifferences) {
    ExprGen gen(11);
    Xoshiro256 rng(12);
    int checked = 0;
    for (int t = 0; t < 200; ++t) {
        Expr e = gen(4);
        Expr d = diff(e, "x");
        for (int k = 0; k < 10; ++k) {
            double x = -2.0 + 4.0 * rng.uniform();
            double y = -2.0 + 4.0 * rng.uniform();
            double h = 1e-5 * (1.0 + std::fabs(x));
            double sym;
            double fd;
            try {
                sym = eval(d, {{"x", x}, {"y", y}});
                fd = (eval(e, {{"x", x + h}, {"y", y}}) - eval(e, {{"x", x - h}, {"y", y}})) / (2 * h);
            } catch (const EvalError&) {
                continue;
            }
            if (!std::isfinite(sym) || std::fabs(sym) > 1e6) continue;
            ++checked;
            EXPECT_LE(std::fabs(sym - fd), 1e-6 * (1.0 + std::fabs(sym))) << to_string(e) << " at x=" << x;
        }
    }
    EXPECT_GT(checked, 1000);
}

TEST(Properties, PrintParseIsIdempotent) {
    ExprGen gen(21);
    for (int t = 0; t < 300; ++t) {
        Expr e = gen(5);
        Expr once = parse(to_string(e));
        Expr twice = parse(to_string(once));
        EXPECT_TRUE(structurally_equal(once, twice)) << to_string(e);
        Bindings b{{"x", 0.7}, {"y", -1.3}};
        double v0 = 0.0;
        try {
            v0 = eval(e, b);
        } catch (const EvalError&) {
            continue;
        }
        EXPECT_NEAR(eval(once, b), v0, 1e-12 * (1.0 + std::fabs(v0))) << to_string(e);
    }
}

TEST(Properties, FoldingPreservesValues) {
    ExprGen gen(31);
    for (int t = 0; t < 300; ++t) {
        Expr e = gen(5);
        // Substituting y by a constant forces re-folding of every subtree that touched it.
        Expr folded = substitute(e, {{"y", Expr(Number::rational(3, 4))}});
        Bindings b{{"x", 1.1}, {"y", 0.75}};
        double v0 = 0.0;
        try {
            v0 = eval(e, b);
        } catch (const EvalError&) {
            continue;
        }
        EXPECT_NEAR(eval(folded, b), v0, 1e-12 * (1.0 + std::fabs(v0))) << to_string(e);
    }
}

}  // namespace
}  // namespace classb
