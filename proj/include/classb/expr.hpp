#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>

#include "classb/number.hpp"

namespace classb {

enum class Op { constant, variable, add, sub, mul, div, pow, exp, log, sqrt, neg };

struct Node;

/// Immutable expression tree. Copies share structure; builders fold constants and
/// drop identities (x+0, x*1, x*0, x^1, x^0) as nodes are created.
class Expr {
  public:
    struct null_t {};

    /// The constant 0.
    Expr();
    explicit Expr(Number value);
    /// Empty handle; only used for the unused child slots of leaves and unary nodes.
    explicit Expr(null_t) noexcept {}
    explicit Expr(std::int64_t value) : Expr(Number(value)) {}

    static Expr var(std::string name);
    static Expr num(std::int64_t v) { return Expr(Number(v)); }
    static Expr real(double v) { return Expr(Number::real(v)); }

    Op op() const noexcept;
    const Number& value() const;
    const std::string& name() const;
    /// First operand (the only one for unary nodes).
    const Expr& lhs() const;
    const Expr& rhs() const;

    bool is_constant() const noexcept { return op() == Op::constant; }
    bool is_zero() const noexcept { return is_constant() && value().is_zero(); }
    bool is_one() const noexcept { return is_constant() && value().is_one(); }

    const Node* node() const noexcept { return node_.get(); }

    friend Expr make_node(Op op, Expr a, Expr b);

  private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

struct Node {
    Op op = Op::constant;
    Number value;
    std::string name;
    Expr a{Expr::null_t{}};
    Expr b{Expr::null_t{}};
};

inline Expr::Expr() {
    static const auto zero = std::make_shared<const Node>();
    node_ = zero;
}

inline Expr make_node(Op op, Expr a, Expr b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Expr::Expr(Number value) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = value;
    node_ = std::move(n);
}

inline Expr Expr::var(std::string name) {
    auto n = std::make_shared<Node>();
    n->op = Op::variable;
    n->name = std::move(name);
    return Expr(std::shared_ptr<const Node>(std::move(n)));
}

inline Op Expr::op() const noexcept { return node_->op; }
inline const Number& Expr::value() const { return node_->value; }
inline const std::string& Expr::name() const { return node_->name; }
inline const Expr& Expr::lhs() const { return node_->a; }
inline const Expr& Expr::rhs() const { return node_->b; }

// ---- builders -------------------------------------------------------------

inline Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr(-a.value());
    if (a.op() == Op::neg) return a.lhs();
    return make_node(Op::neg, a, Expr(Expr::null_t{}));
}

inline Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr(a.value() + b.value());
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    return make_node(Op::add, a, b);
}

inline Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr(a.value() - b.value());
    if (b.is_zero()) return a;
    if (a.is_zero()) return -b;
    return make_node(Op::sub, a, b);
}

inline Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return Expr(a.value() * b.value());
    if (a.is_zero() || b.is_zero()) return Expr::num(0);
    if (a.is_one()) return b;
    if (b.is_one()) return a;
    // c1 * (c2 * e) -> (c1*c2) * e keeps repeated differentiation from stacking factors.
    if (a.is_constant() && b.op() == Op::mul && b.lhs().is_constant())
        return Expr(a.value() * b.lhs().value()) * b.rhs();
    if (b.is_constant() && !a.is_constant()) return b * a;
    return make_node(Op::mul, a, b);
}

inline Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) {
        if (auto q = divide(a.value(), b.value())) return Expr(*q);
        return make_node(Op::div, a, b);
    }
    if (b.is_one()) return a;
    if (a.is_zero() && !b.is_zero()) return Expr::num(0);
    return make_node(Op::div, a, b);
}

inline Expr pow(const Expr& base, const Expr& exponent) {
    if (base.is_constant() && exponent.is_constant()) {
        if (auto p = power(base.value(), exponent.value())) return Expr(*p);
        return make_node(Op::pow, base, exponent);
    }
    if (exponent.is_zero()) return Expr::num(1);
    if (exponent.is_one()) return base;
    if (base.is_one()) return Expr::num(1);
    if (base.is_zero() && exponent.is_constant() && !exponent.value().is_negative()) return Expr::num(0);
    return make_node(Op::pow, base, exponent);
}

inline Expr pow(const Expr& base, std::int64_t exponent) { return pow(base, Expr::num(exponent)); }

inline Expr exp(const Expr& a) {
    if (a.is_zero()) return Expr::num(1);
    if (a.is_constant()) return Expr::real(std::exp(a.value().to_double()));
    return make_node(Op::exp, a, Expr(Expr::null_t{}));
}

inline Expr log(const Expr& a) {
    if (a.is_one()) return Expr::num(0);
    if (a.is_constant() && !a.value().is_negative() && !a.value().is_zero())
        return Expr::real(std::log(a.value().to_double()));
    return make_node(Op::log, a, Expr(Expr::null_t{}));
}

inline Expr sqrt(const Expr& a) {
    if (a.is_constant() && !a.value().is_negative()) {
        const Number& v = a.value();
        if (v.is_exact()) {
            auto isqrt = [](std::int64_t n) -> std::int64_t {
                auto r = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
                while (r > 0 && r * r > n) --r;
                while ((r + 1) * (r + 1) <= n) ++r;
                return r;
            };
            std::int64_t p = isqrt(v.numerator());
            std::int64_t q = isqrt(v.denominator());
            if (p * p == v.numerator() && q * q == v.denominator()) return Expr(Number::rational(p, q));
        }
        return Expr::real(std::sqrt(v.to_double()));
    }
    return make_node(Op::sqrt, a, Expr(Expr::null_t{}));
}

// ---- structure ------------------------------------------------------------

inline bool is_unary(Op op) { return op == Op::exp || op == Op::log || op == Op::sqrt || op == Op::neg; }
inline bool is_binary(Op op) {
    return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div || op == Op::pow;
}

inline bool structurally_equal(const Expr& x, const Expr& y) {
    if (x.node() == y.node()) return true;
    if (x.op() != y.op()) return false;
    switch (x.op()) {
        case Op::constant: return x.value() == y.value() && x.value().is_exact() == y.value().is_exact();
        case Op::variable: return x.name() == y.name();
        default: break;
    }
    if (!structurally_equal(x.lhs(), y.lhs())) return false;
    return is_unary(x.op()) || structurally_equal(x.rhs(), y.rhs());
}

inline void collect_vars(const Expr& e, std::set<std::string>& out,
                         std::unordered_map<const Node*, bool>& seen) {
    if (!seen.emplace(e.node(), true).second) return;
    if (e.op() == Op::variable) {
        out.insert(e.name());
        return;
    }
    if (e.op() == Op::constant) return;
    collect_vars(e.lhs(), out, seen);
    if (is_binary(e.op())) collect_vars(e.rhs(), out, seen);
}

inline std::set<std::string> free_vars(const Expr& e) {
    std::set<std::string> out;
    std::unordered_map<const Node*, bool> seen;
    collect_vars(e, out, seen);
    return out;
}

/// Number of distinct nodes (shared subtrees counted once).
inline std::size_t dag_size(const Expr& e) {
    std::unordered_map<const Node*, bool> seen;
    auto walk = [&](auto&& self, const Expr& x) -> void {
        if (!seen.emplace(x.node(), true).second) return;
        if (x.op() == Op::constant || x.op() == Op::variable) return;
        self(self, x.lhs());
        if (is_binary(x.op())) self(self, x.rhs());
    };
    walk(walk, e);
    return seen.size();
}

// ---- printing -------------------------------------------------------------

namespace detail {

// Precedence levels follow the grammar: sum 1, term 2, unary 3, factor 4, base 5.
inline int precedence(const Expr& e) {
    switch (e.op()) {
        case Op::add:
        case Op::sub: return 1;
        case Op::mul:
        case Op::div: return 2;
        case Op::neg: return 3;
        case Op::pow: return 4;
        case Op::constant:
            if (e.value().is_exact() && e.value().denominator() != 1) return 2;
            if (e.value().is_negative()) return 3;
            return 5;
        default: return 5;
    }
}

inline void print(const Expr& e, std::string& out);

inline void print_at(const Expr& e, int min_prec, std::string& out) {
    if (precedence(e) < min_prec) {
        out += '(';
        print(e, out);
        out += ')';
    } else {
        print(e, out);
    }
}

inline void print(const Expr& e, std::string& out) {
    switch (e.op()) {
        case Op::constant: out += e.value().str(); return;
        case Op::variable: out += e.name(); return;
        case Op::add:
            print_at(e.lhs(), 1, out);
            out += " + ";
            print_at(e.rhs(), 2, out);
            return;
        case Op::sub:
            print_at(e.lhs(), 1, out);
            out += " - ";
            print_at(e.rhs(), 2, out);
            return;
        case Op::mul:
            print_at(e.lhs(), 2, out);
            out += '*';
            print_at(e.rhs(), 3, out);
            return;
        case Op::div:
            print_at(e.lhs(), 2, out);
            out += '/';
            print_at(e.rhs(), 3, out);
            return;
        case Op::neg:
            out += '-';
            print_at(e.lhs(), 4, out);
            return;
        case Op::pow:
            print_at(e.lhs(), 5, out);
            out += '^';
            print_at(e.rhs(), 3, out);
            return;
        case Op::exp: out += "exp("; break;
        case Op::log: out += "log("; break;
        case Op::sqrt: out += "sqrt("; break;
    }
    print(e.lhs(), out);
    out += ')';
}

}  // namespace detail

/// Renders in the input grammar; parse(to_string(e)) rebuilds an equal tree up to folding.
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print(e, out);
    return out;
}

/// Printed form cut to `limit` characters, for diagnostics.
inline std::string short_string(const Expr& e, std::size_t limit = 160) {
    std::string s = to_string(e);
    if (s.size() > limit) s = s.substr(0, limit) + "...";
    return s;
}

}  // namespace classb
