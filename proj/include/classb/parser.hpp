#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "classb/errors.hpp"
#include "classb/expr.hpp"

namespace classb {

namespace detail {

// Recursive descent over
//   expr   := term (("+"|"-") term)*
//   term   := unary (("*"|"/") unary)*
//   unary  := "-" unary | factor
//   factor := base ("^" unary)?
//   base   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse_all() {
        Expr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail({"operator", "end of input"});
        return e;
    }

  private:
    Expr expr() {
        Expr acc = term();
        for (;;) {
            skip_ws();
            if (accept('+')) {
                acc = acc + term();
            } else if (accept('-')) {
                acc = acc - term();
            } else {
                return acc;
            }
        }
    }

    Expr term() {
        Expr acc = unary();
        for (;;) {
            skip_ws();
            if (accept('*')) {
                acc = acc * unary();
            } else if (accept('/')) {
                acc = acc / unary();
            } else {
                return acc;
            }
        }
    }

    Expr unary() {
        skip_ws();
        if (accept('-')) return -unary();
        return factor();
    }

    Expr factor() {
        Expr b = base();
        skip_ws();
        if (accept('^')) return pow(b, unary());
        return b;
    }

    Expr base() {
        skip_ws();
        if (pos_ >= text_.size()) fail({"number", "identifier", "("});
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            std::string ident(text_.substr(start, pos_ - start));
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '(') {
                if (ident != "exp" && ident != "log" && ident != "sqrt")
                    throw ParseError("unknown function '" + ident + "' at offset " + std::to_string(start),
                                     start, {"exp", "log", "sqrt"});
                ++pos_;
                Expr arg = expr();
                skip_ws();
                if (!accept(')')) fail({")"});
                if (ident == "exp") return exp(arg);
                if (ident == "log") return log(arg);
                return sqrt(arg);
            }
            return Expr::var(std::move(ident));
        }
        if (accept('(')) {
            Expr inner = expr();
            skip_ws();
            if (!accept(')')) fail({")"});
            return inner;
        }
        fail({"number", "identifier", "("});
    }

    Expr number() {
        std::size_t start = pos_;
        bool digits = false;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
            digits = true;
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
                digits = true;
            }
        }
        if (!digits) {
            pos_ = start;
            fail({"number"});
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        return Expr(Number::from_decimal(text_.substr(start, pos_ - start)));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(std::vector<std::string> expected) {
        std::string msg = "syntax error at offset " + std::to_string(pos_) + ": expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i) msg += " or ";
            msg += expected[i];
        }
        msg += pos_ < text_.size() ? std::string(", found '") + text_[pos_] + "'" : ", found end of input";
        throw ParseError(msg, pos_, std::move(expected));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse_all(); }

}  // namespace classb
