#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>

namespace classb {

/// Scalar constant: an exact int64 rational while it fits, otherwise a double.
class Number {
  public:
    Number() = default;
    Number(std::int64_t v) : num_(v) {}  // NOLINT(google-explicit-constructor)

    static Number real(double v) {
        Number n;
        n.exact_ = false;
        n.real_ = v;
        return n;
    }

    /// Exact p/q when representable; q == 0 is the caller's bug.
    static Number rational(__int128 p, __int128 q) {
        if (q < 0) {
            p = -p;
            q = -q;
        }
        __int128 g = gcd128(p < 0 ? -p : p, q);
        if (g > 1) {
            p /= g;
            q /= g;
        }
        if (!fits(p) || !fits(q)) return real(static_cast<double>(p) / static_cast<double>(q));
        Number n;
        n.num_ = static_cast<std::int64_t>(p);
        n.den_ = static_cast<std::int64_t>(q);
        return n;
    }

    /// Parses a decimal literal (digits, optional fraction, optional exponent).
    /// Stays exact whenever the reduced fraction fits in int64.
    static Number from_decimal(std::string_view text) {
        __int128 mant = 0;
        int scale = 0;
        int digits = 0;
        std::size_t i = 0;
        bool seen_dot = false;
        for (; i < text.size(); ++i) {
            char c = text[i];
            if (c == '.') {
                seen_dot = true;
                continue;
            }
            if (c < '0' || c > '9') break;
            if (digits < 30) {
                mant = mant * 10 + (c - '0');
                if (seen_dot) --scale;
            }
            if (mant != 0) ++digits;
        }
        bool overflow = digits >= 30;
        if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
            ++i;
            int sign = 1;
            if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
                sign = text[i] == '-' ? -1 : 1;
                ++i;
            }
            int e = 0;
            for (; i < text.size() && e < 100000; ++i) e = e * 10 + (text[i] - '0');
            scale += sign * e;
        }
        auto fallback = [&] { return real(std::strtod(std::string(text).c_str(), nullptr)); };
        if (overflow || scale > 30 || scale < -18) return fallback();
        __int128 p = mant;
        __int128 q = 1;
        for (int s = 0; s < scale; ++s) {
            p *= 10;
            if (p > (__int128(1) << 120)) return fallback();
        }
        for (int s = 0; s > scale; --s) q *= 10;
        Number n = rational(p, q);
        return n;
    }

    bool is_exact() const noexcept { return exact_; }
    bool is_integer() const noexcept { return exact_ ? den_ == 1 : (std::isfinite(real_) && std::floor(real_) == real_); }
    bool is_zero() const noexcept { return exact_ ? num_ == 0 : real_ == 0.0; }
    bool is_one() const noexcept { return exact_ ? (num_ == 1 && den_ == 1) : real_ == 1.0; }
    bool is_negative() const noexcept { return exact_ ? num_ < 0 : real_ < 0.0; }
    std::int64_t numerator() const noexcept { return num_; }
    std::int64_t denominator() const noexcept { return den_; }

    double to_double() const noexcept {
        return exact_ ? static_cast<double>(num_) / static_cast<double>(den_) : real_;
    }

    std::string str() const {
        if (exact_) {
            if (den_ == 1) return std::to_string(num_);
            return std::to_string(num_) + "/" + std::to_string(den_);
        }
        if (std::isinf(real_)) return real_ > 0 ? "1e999" : "-1e999";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", real_);
        return buf;
    }

    friend Number operator+(const Number& a, const Number& b) {
        if (a.exact_ && b.exact_)
            return rational(__int128(a.num_) * b.den_ + __int128(b.num_) * a.den_, __int128(a.den_) * b.den_);
        return real(a.to_double() + b.to_double());
    }
    friend Number operator-(const Number& a) {
        if (a.exact_ && a.num_ != INT64_MIN) {
            Number n = a;
            n.num_ = -a.num_;
            return n;
        }
        return real(-a.to_double());
    }
    friend Number operator-(const Number& a, const Number& b) { return a + (-b); }
    friend Number operator*(const Number& a, const Number& b) {
        if (a.exact_ && b.exact_) return rational(__int128(a.num_) * b.num_, __int128(a.den_) * b.den_);
        return real(a.to_double() * b.to_double());
    }
    /// Empty on division by an exact or real zero.
    friend std::optional<Number> divide(const Number& a, const Number& b) {
        if (b.is_zero()) return std::nullopt;
        if (a.exact_ && b.exact_) return rational(__int128(a.num_) * b.den_, __int128(a.den_) * b.num_);
        return real(a.to_double() / b.to_double());
    }

    /// Empty when the power is undefined (0^negative, negative^fractional).
    friend std::optional<Number> power(const Number& base, const Number& exponent) {
        if (exponent.is_zero()) return Number(1);
        if (exponent.exact_ && exponent.den_ == 1 && base.exact_) {
            std::int64_t e = exponent.num_;
            if (base.is_zero()) return e > 0 ? std::optional<Number>(Number(0)) : std::nullopt;
            std::int64_t mag = e < 0 ? -e : e;
            Number acc(1);
            Number b = base;
            while (mag > 0 && acc.exact_) {
                if (mag & 1) acc = acc * b;
                mag >>= 1;
                if (mag > 0) b = b * b;
            }
            if (!acc.exact_) return real(std::pow(base.to_double(), exponent.to_double()));
            if (e < 0) return divide(Number(1), acc);
            return acc;
        }
        double bv = base.to_double();
        double ev = exponent.to_double();
        if (bv < 0 && !exponent.is_integer()) return std::nullopt;
        if (bv == 0 && ev < 0) return std::nullopt;
        return real(std::pow(bv, ev));
    }

    friend bool operator==(const Number& a, const Number& b) {
        if (a.exact_ && b.exact_) return a.num_ == b.num_ && a.den_ == b.den_;
        return a.to_double() == b.to_double();
    }

  private:
    static bool fits(__int128 v) { return v >= INT64_MIN && v <= INT64_MAX; }
    static __int128 gcd128(__int128 a, __int128 b) {
        while (b != 0) {
            __int128 t = a % b;
            a = b;
            b = t;
        }
        return a;
    }

    bool exact_ = true;
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
    double real_ = 0.0;
};

}  // namespace classb
