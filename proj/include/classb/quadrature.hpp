#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "classb/errors.hpp"

namespace classb {

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
class GaussLegendre {
  public:
    explicit GaussLegendre(std::size_t n) : nodes_(n), weights_(n) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i < half; ++i) {
            double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0;
                double p1 = 0.0;
                for (std::size_t j = 1; j <= n; ++j) {
                    double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * static_cast<double>(j) - 1.0) * z * p1 - (static_cast<double>(j) - 1.0) * p2) /
                         static_cast<double>(j);
                }
                dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
                double dz = p0 / dp;
                z -= dz;
                if (std::fabs(dz) < 1e-16) break;
            }
            nodes_[i] = -z;
            nodes_[n - 1 - i] = z;
            weights_[i] = weights_[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(mid + half * nodes_[i]);
        return acc * half;
    }

  private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

/// One fixed rule on [a,b], then the same rule on both halves; the refined sum is
/// returned with the difference as its error estimate.
template <class F>
QuadResult gauss_legendre_refined(F&& f, double a, double b, std::size_t nodes = 32) {
    const GaussLegendre rule(nodes);
    const double coarse = rule.integrate(f, a, b);
    const double mid = 0.5 * (a + b);
    const double fine = rule.integrate(f, a, mid) + rule.integrate(f, mid, b);
    return {fine, std::fabs(fine - coarse)};
}

namespace detail {

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (non-negative half).
inline constexpr std::array<double, 8> gk15_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> gk15_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> g7_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
QuadResult gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kronrod = gk15_weights[7] * fc;
    double gauss = g7_weights[3] * fc;
    for (std::size_t i = 0; i < 7; ++i) {
        const double dx = h * gk15_nodes[i];
        const double sum = f(c - dx) + f(c + dx);
        kronrod += gk15_weights[i] * sum;
        if (i % 2 == 1) gauss += g7_weights[i / 2] * sum;
    }
    return {kronrod * h, std::fabs((kronrod - gauss) * h)};
}

template <class F>
QuadResult adaptive_gk(F& f, double a, double b, double tol, int depth) {
    QuadResult whole = gk15(f, a, b);
    if (whole.error <= tol || depth <= 0) return whole;
    const double mid = 0.5 * (a + b);
    QuadResult left = adaptive_gk(f, a, mid, 0.5 * tol, depth - 1);
    QuadResult right = adaptive_gk(f, mid, b, 0.5 * tol, depth - 1);
    return {left.value + right.value, left.error + right.error};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod 7/15 with interval bisection to an absolute tolerance.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-10, int max_depth = 40) {
    if (a == b) return {};
    if (a > b) {
        QuadResult r = integrate_adaptive(f, b, a, abs_tol, max_depth);
        return {-r.value, r.error};
    }
    QuadResult r = detail::adaptive_gk(f, a, b, abs_tol, max_depth);
    if (r.error > abs_tol * 10.0) throw NumericalError("adaptive quadrature did not reach the requested tolerance");
    return r;
}

}  // namespace classb
