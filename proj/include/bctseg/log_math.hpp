#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace bctseg {

/// Log of zero. Absorbs addition and loses every max comparison.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double v) { return v == kLogZero; }

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (is_log_zero(b)) return a;
    return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> values) {
    double hi = kLogZero;
    for (double v : values) hi = std::max(hi, v);
    if (is_log_zero(hi)) return kLogZero;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - hi);
    return hi + std::log(acc);
}

/// log C(n, k) via log-gamma; kLogZero when k is outside [0, n].
inline double log_binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || n < 0 || k > n) return kLogZero;
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace bctseg
