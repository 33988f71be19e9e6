#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace bctseg {

using Count = std::uint32_t;

/// Log of the Krichevsky-Trofimov block probability of a count vector,
/// i.e. the marginal likelihood under a Dirichlet(1/2, ..., 1/2) prior:
///
///   Pe(a) = prod_j prod_{i<a(j)} (i + 1/2) / prod_{i<M} (i + m/2),  M = sum_j a(j)
///
/// Closed form through log-gamma.
inline double kt_log_prob(std::span<const Count> counts) {
    const double m = static_cast<double>(counts.size());
    double total = 0.0;
    double num = 0.0;
    for (Count a : counts) {
        if (a == 0) continue;
        num += std::lgamma(a + 0.5) - std::lgamma(0.5);
        total += a;
    }
    if (total == 0.0) return 0.0;
    return num - (std::lgamma(total + m / 2.0) - std::lgamma(m / 2.0));
}

/// Same quantity built one increment at a time, as a sequential coder would.
inline double kt_log_prob_sequential(std::span<const Count> counts) {
    const double half_m = static_cast<double>(counts.size()) / 2.0;
    double log_p = 0.0;
    std::uint64_t total = 0;
    for (Count a : counts) {
        for (Count i = 0; i < a; ++i) {
            log_p += std::log((i + 0.5) / (static_cast<double>(total) + half_m));
            ++total;
        }
    }
    return log_p;
}

/// Posterior mean of theta under the Dirichlet(1/2) prior: (a(j) + 1/2) / (M + m/2).
inline std::vector<double> leaf_posterior_mean(std::span<const Count> counts) {
    const double m = static_cast<double>(counts.size());
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> theta(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) theta[j] = (counts[j] + 0.5) / (total + m / 2.0);
    return theta;
}

/// Cached lgamma differences so that log Pe costs m + 1 table lookups.
class KtTable {
public:
    explicit KtTable(std::size_t alphabet_size) : half_m_(static_cast<double>(alphabet_size) / 2.0) {
        if (alphabet_size < 2) throw std::invalid_argument("alphabet size must be at least 2");
        grow(1024);
    }

    /// sum_{i<k} log(i + 1/2)
    double log_half_rising(std::size_t k) {
        if (k >= half_.size()) grow(k + 1);
        return half_[k];
    }
    /// sum_{i<k} log(i + m/2)
    double log_total_rising(std::size_t k) {
        if (k >= total_.size()) grow(k + 1);
        return total_[k];
    }

    double log_pe(std::span<const Count> counts) {
        std::size_t total = 0;
        double v = 0.0;
        for (Count a : counts) {
            v += log_half_rising(a);
            total += a;
        }
        return v - log_total_rising(total);
    }

private:
    void grow(std::size_t need) {
        std::size_t size = std::max<std::size_t>(need, 2 * half_.size());
        const double lg_half = std::lgamma(0.5);
        const double lg_m = std::lgamma(half_m_);
        for (std::size_t k = half_.size(); k < size; ++k) {
            half_.push_back(std::lgamma(k + 0.5) - lg_half);
            total_.push_back(std::lgamma(k + half_m_) - lg_m);
        }
    }

    double half_m_;
    std::vector<double> half_;
    std::vector<double> total_;
};

}  // namespace bctseg
