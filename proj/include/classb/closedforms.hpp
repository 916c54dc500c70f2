#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <vector>

#include "classb/errors.hpp"
#include "classb/expr.hpp"

namespace classb {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr unsigned stirling_max = 64;

/// Triangle of S(k, m) for 0 <= m <= k, grown on demand by S(k+1,m) = m S(k,m) + S(k,m-1).
class StirlingCache {
  public:
    static StirlingCache& instance() {
        static StirlingCache cache;
        return cache;
    }

    BigInt get(unsigned k, unsigned m) {
        if (m > k || k > stirling_max) throw ArgumentError("stirling2: need 0 <= m <= k <= 64");
        std::lock_guard lock(mutex_);
        while (rows_.size() <= k) {
            const std::size_t r = rows_.size();
            std::vector<BigInt> row(r + 1);
            if (r == 0) {
                row[0] = 1;
            } else {
                const auto& prev = rows_.back();
                row[0] = 0;
                for (std::size_t j = 1; j <= r; ++j)
                    row[j] = (j < r ? BigInt(j) * prev[j] : BigInt(0)) + prev[j - 1];
            }
            rows_.push_back(std::move(row));
        }
        return rows_[k][m];
    }

  private:
    StirlingCache() = default;
    std::mutex mutex_;
    std::vector<std::vector<BigInt>> rows_;
};

inline BigInt binomial_big(unsigned n, unsigned k) {
    if (k > n) return 0;
    BigInt c = 1;
    for (unsigned i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

inline BigInt factorial_big(unsigned n) {
    BigInt f = 1;
    for (unsigned i = 2; i <= n; ++i) f *= i;
    return f;
}

/// (1/m!) sum_j C(m,j) (-1)^j (m-j)^k, without consulting the triangle.
inline BigInt stirling2_explicit(unsigned k, unsigned m) {
    if (m > k || k > stirling_max) throw ArgumentError("stirling2: need 0 <= m <= k <= 64");
    BigInt acc = 0;
    for (unsigned j = 0; j <= m; ++j) {
        BigInt term = binomial_big(m, j) * boost::multiprecision::pow(BigInt(m - j), k);
        acc += (j % 2 == 0) ? term : BigInt(-term);
    }
    return acc / factorial_big(m);
}

/// Stirling number of the second kind, from the explicit sum and checked against the triangle.
inline BigInt stirling2(unsigned k, unsigned m) {
    BigInt s = stirling2_explicit(k, m);
    if (s != StirlingCache::instance().get(k, m))
        throw NumericalError("stirling2: explicit sum disagrees with the recurrence at (" + std::to_string(k) + ", " +
                             std::to_string(m) + ")");
    return s;
}

/// (2r+1)!! = (2r+1)! / (2^r r!).
inline BigInt double_factorial_odd(unsigned r) {
    return factorial_big(2 * r + 1) / (boost::multiprecision::pow(BigInt(2), r) * factorial_big(r));
}

inline double to_double(const BigInt& v) { return v.convert_to<double>(); }

/// Exact when it fits in 64 bits, otherwise the nearest double.
inline Number to_number(const BigInt& v) {
    if (v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max())
        return Number(v.convert_to<std::int64_t>());
    return Number::real(to_double(v));
}

// ---- quadratic variance: V(x) = x(ax + b) -------------------------------------

/// sigma_{k+1} = x(ax+b) sum_{m=1}^k m! b^{k-m} S(k,m) (ax)^{m-1}.
inline double cumulant_quadratic(double a, double b, double x, unsigned k) {
    if (k < 1) throw ArgumentError("cumulant_quadratic: k must be >= 1");
    double acc = 0.0;
    for (unsigned m = 1; m <= k; ++m) {
        double coeff = to_double(factorial_big(m) * stirling2(k, m));
        acc += coeff * std::pow(b, static_cast<double>(k - m)) * std::pow(a * x, static_cast<double>(m - 1));
    }
    return x * (a * x + b) * acc;
}

/// Symbolic form of the same sum; a, b and x may be any expressions.
inline Expr cumulant_quadratic(const Expr& a, const Expr& b, const Expr& x, unsigned k) {
    if (k < 1) throw ArgumentError("cumulant_quadratic: k must be >= 1");
    Expr acc = Expr::num(0);
    for (unsigned m = 1; m <= k; ++m) {
        Expr coeff(to_number(factorial_big(m) * stirling2(k, m)));
        acc = acc + coeff * pow(b, static_cast<std::int64_t>(k - m)) * pow(a * x, static_cast<std::int64_t>(m - 1));
    }
    return x * (a * x + b) * acc;
}

/// Binomial(n, p): V = x(1 - x/n), so a = -1/n, b = 1, x = np and
/// sigma_{k+1} = np(1-p) sum_m m! S(k,m) (-p)^{m-1}.
inline double binomial_cumulant(double n, double p, unsigned k) {
    if (k < 1) throw ArgumentError("binomial_cumulant: k must be >= 1");
    double acc = 0.0;
    for (unsigned m = 1; m <= k; ++m)
        acc += to_double(factorial_big(m) * stirling2(k, m)) * std::pow(-p, static_cast<double>(m - 1));
    return n * p * (1.0 - p) * acc;
}

/// Negative binomial(n, p): V = x(1 + x/n), so a = 1/n, b = 1, x = n(1-p)/p and
/// sigma_{k+1} = n p^{-2}(1-p) sum_m m! S(k,m) p^{1-m} (1-p)^{m-1}.
inline double negative_binomial_cumulant(double n, double p, unsigned k) {
    if (k < 1) throw ArgumentError("negative_binomial_cumulant: k must be >= 1");
    double acc = 0.0;
    for (unsigned m = 1; m <= k; ++m)
        acc += to_double(factorial_big(m) * stirling2(k, m)) * std::pow((1.0 - p) / p, static_cast<double>(m - 1));
    return n * (1.0 - p) / (p * p) * acc;
}

/// sigma_k = (k-1)! lambda rate^{-k} for the gamma distribution (shape lambda).
inline double gamma_cumulant(double rate, double shape, unsigned k) {
    if (k < 1) throw ArgumentError("gamma_cumulant: k must be >= 1");
    return std::tgamma(static_cast<double>(k)) * shape * std::pow(rate, -static_cast<double>(k));
}

// ---- first-passage random walk ---------------------------------------------------

/// c_{k,r} = sum_{m=r}^k C(k,m) 2^{m-r} S(m,r).
inline BigInt randomwalk_coefficient(unsigned k, unsigned r) {
    BigInt acc = 0;
    for (unsigned m = r; m <= k; ++m)
        acc += binomial_big(k, m) * boost::multiprecision::pow(BigInt(2), m - r) * stirling2(m, r);
    return acc;
}

/// sigma_{k+2} = (x^3/n^2 - x) sum_{r=0}^k (-1)^{k+r} (2r+1)!! c_{k,r} (x/n)^{2r} as an expression in x, n.
inline Expr randomwalk_cumulant_expr(unsigned k, const Expr& x = Expr::var("x"), const Expr& n = Expr::var("n")) {
    Expr acc = Expr::num(0);
    const Expr ratio = x / n;
    for (unsigned r = 0; r <= k; ++r) {
        Expr coeff(to_number(double_factorial_odd(r) * randomwalk_coefficient(k, r)));
        if ((k + r) % 2 == 1) coeff = -coeff;
        acc = acc + coeff * pow(ratio, static_cast<std::int64_t>(2 * r));
    }
    return (pow(x, 3) / pow(n, 2) - x) * acc;
}

/// sigma_{k+2} at x = n/(2p-1).
inline double randomwalk_cumulant(unsigned n, double p, unsigned k) {
    if (n < 1) throw ArgumentError("randomwalk_cumulant: n must be >= 1");
    if (!(p > 0.5 && p < 1.0)) throw ArgumentError("randomwalk_cumulant: need 1/2 < p < 1");
    const double nn = static_cast<double>(n);
    const double x = nn / (2.0 * p - 1.0);
    const double ratio2 = (x / nn) * (x / nn);
    double acc = 0.0;
    double pw = 1.0;
    for (unsigned r = 0; r <= k; ++r) {
        double coeff = to_double(double_factorial_odd(r) * randomwalk_coefficient(k, r));
        acc += ((k + r) % 2 == 1 ? -coeff : coeff) * pw;
        pw *= ratio2;
    }
    return (x * x * x / (nn * nn) - x) * acc;
}

}  // namespace classb
