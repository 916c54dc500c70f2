#pragma once

#include <map>
#include <string>
#include <unordered_map>

#include "classb/expr.hpp"

namespace classb {

namespace detail {

class Differentiator {
  public:
    explicit Differentiator(const std::string& var) : var_(var) {}

    Expr operator()(const Expr& e) {
        if (e.op() == Op::constant) return Expr::num(0);
        if (e.op() == Op::variable) return Expr::num(e.name() == var_ ? 1 : 0);
        // Shared subtrees are differentiated once per call.
        if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second;
        Expr d = rule(e);
        memo_.emplace(e.node(), d);
        return d;
    }

  private:
    Expr rule(const Expr& e) {
        const Expr& u = e.lhs();
        switch (e.op()) {
            case Op::add: return (*this)(u) + (*this)(e.rhs());
            case Op::sub: return (*this)(u) - (*this)(e.rhs());
            case Op::neg: return -(*this)(u);
            case Op::mul: {
                const Expr& v = e.rhs();
                return (*this)(u) * v + u * (*this)(v);
            }
            case Op::div: {
                const Expr& v = e.rhs();
                Expr du = (*this)(u);
                Expr dv = (*this)(v);
                if (dv.is_zero()) return du / v;
                return (du * v - u * dv) / pow(v, 2);
            }
            case Op::pow: {
                const Expr& v = e.rhs();
                Expr du = (*this)(u);
                Expr dv = (*this)(v);
                if (dv.is_zero()) {
                    if (du.is_zero()) return Expr::num(0);
                    return v * pow(u, v - Expr::num(1)) * du;
                }
                return e * (dv * log(u) + v * du / u);
            }
            case Op::exp: return e * (*this)(u);
            case Op::log: return (*this)(u) / u;
            case Op::sqrt: return (*this)(u) / (Expr::num(2) * e);
            default: return Expr::num(0);
        }
    }

    const std::string& var_;
    std::unordered_map<const Node*, Expr> memo_;
};

class Substituter {
  public:
    explicit Substituter(const std::map<std::string, Expr>& repl) : repl_(repl) {}

    Expr operator()(const Expr& e) {
        if (e.op() == Op::constant) return e;
        if (e.op() == Op::variable) {
            auto it = repl_.find(e.name());
            return it == repl_.end() ? e : it->second;
        }
        if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second;
        Expr a = (*this)(e.lhs());
        Expr r;
        switch (e.op()) {
            case Op::add: r = a + (*this)(e.rhs()); break;
            case Op::sub: r = a - (*this)(e.rhs()); break;
            case Op::mul: r = a * (*this)(e.rhs()); break;
            case Op::div: r = a / (*this)(e.rhs()); break;
            case Op::pow: r = pow(a, (*this)(e.rhs())); break;
            case Op::neg: r = -a; break;
            case Op::exp: r = exp(a); break;
            case Op::log: r = log(a); break;
            case Op::sqrt: r = sqrt(a); break;
            default: r = e; break;
        }
        memo_.emplace(e.node(), r);
        return r;
    }

  private:
    const std::map<std::string, Expr>& repl_;
    std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace detail

/// Exact symbolic derivative; every other variable is held constant.
inline Expr diff(const Expr& e, const std::string& var) { return detail::Differentiator(var)(e); }

/// Simultaneous substitution: replacements are not themselves rewritten.
inline Expr substitute(const Expr& e, const std::map<std::string, Expr>& replacements) {
    return detail::Substituter(replacements)(e);
}

/// Rebuilds the tree through the folding builders.
inline Expr fold(const Expr& e) { return substitute(e, {}); }

}  // namespace classb
