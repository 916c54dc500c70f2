#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "classb/families.hpp"

namespace classb::testing {

/// |a - b| <= tol * max(|a|, |b|), with an absolute floor for values that are zero.
inline ::testing::AssertionResult rel_close(double a, double b, double tol, double abs_floor = 1e-14) {
    const double diff = std::fabs(a - b);
    if (diff <= tol * std::max(std::fabs(a), std::fabs(b)) || diff <= abs_floor) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << a << " vs " << b << " (relative difference "
                                         << diff / std::max(std::fabs(a), std::fabs(b)) << ", tolerance " << tol << ")";
}

/// Construction parameters used across the suites for every built-in family.
inline std::map<std::string, double> default_params(const std::string& name) {
    static const std::map<std::string, std::map<std::string, double>> table = {
        {"binomial", {{"n", 5}, {"p", 0.3}}},
        {"poisson", {{"lambda", 2}}},
        {"negative_binomial", {{"n", 3}, {"p", 0.4}}},
        {"normal", {{"alpha", 0}, {"sigma2", 1}}},
        {"gamma", {{"alpha", 2}, {"lambda", 3}}},
        {"mvnormal", {{"alpha1", 0.5}, {"alpha2", -1}, {"sigma11", 1}, {"sigma22", 2}, {"sigma12", 0.5}}},
        {"multinomial", {{"n", 4}, {"p1", 0.2}, {"p2", 0.3}}},
        {"negative_multinomial", {{"n", 3}, {"p1", 0.2}, {"p2", 0.3}}},
        {"logarithmic", {{"theta", 0.4}}},
        {"mv_logarithmic", {{"theta1", 0.2}, {"theta2", 0.3}}},
        {"random_walk", {{"n", 2}, {"p", 0.8}}},
        {"borel_tanner", {{"n", 2}, {"alpha", 0.5}}},
    };
    return table.at(name);
}

inline FamilySpec default_family(const std::string& name) { return builtin(name, default_params(name)); }

}  // namespace classb::testing
