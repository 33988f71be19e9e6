#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bctseg/context_tree.hpp"
#include "bctseg/log_math.hpp"
#include "bctseg/sequence.hpp"

namespace bctseg {

using Index = std::int64_t;

/// Interior change-points p_1 < ... < p_l in {2, ..., n-1}, with the implicit
/// end-points p_0 = 1 and p_{l+1} = n. Adjacent points are representable;
/// the location prior gives them zero mass.
class ChangePoints {
public:
    ChangePoints(Index n, std::vector<Index> positions) : n_(n), positions_(std::move(positions)) {
        if (n_ < 2) throw std::invalid_argument("series length must be at least 2");
        for (std::size_t k = 0; k < positions_.size(); ++k) {
            if (positions_[k] < 2 || positions_[k] > n_ - 1)
                throw std::invalid_argument("change-point " + std::to_string(positions_[k]) + " outside [2, n-1]");
            if (k && positions_[k] <= positions_[k - 1])
                throw std::invalid_argument("change-points must be strictly increasing");
        }
    }

    Index n() const { return n_; }
    std::size_t ell() const { return positions_.size(); }
    const std::vector<Index>& positions() const { return positions_; }

    /// p_j for j in 0..l+1, end-points included.
    Index at(std::size_t j) const {
        if (j == 0) return 1;
        if (j == positions_.size() + 1) return n_;
        return positions_.at(j - 1);
    }

    bool contains(Index p) const { return std::binary_search(positions_.begin(), positions_.end(), p); }

    bool operator==(const ChangePoints& o) const { return n_ == o.n_ && positions_ == o.positions_; }
    bool operator<(const ChangePoints& o) const {
        if (positions_.size() != o.positions_.size()) return positions_.size() < o.positions_.size();
        return positions_ < o.positions_;
    }

private:
    Index n_;
    std::vector<Index> positions_;
};

/// One homogeneous stretch: observations first..last (1-based, inclusive).
/// Its initial context is the D symbols just before `first`, which may reach
/// into the previous segment or the global initial context.
struct SegmentView {
    std::size_t index;  // 1-based
    Index first;
    Index last;
    std::span<const Symbol> context;
    std::span<const Symbol> observations;

    Index length() const { return last - first + 1; }
};

/// Segment j covers x_{p_{j-1}} .. x_{p_j - 1}, except the last which runs to x_n.
inline std::vector<SegmentView> partition(const Sequence& x, const ChangePoints& p) {
    if (static_cast<Index>(x.n()) != p.n()) throw std::invalid_argument("change-points built for another length");
    const std::size_t depth = x.context_length();
    const auto full = x.full();
    std::vector<SegmentView> out;
    for (std::size_t j = 1; j <= p.ell() + 1; ++j) {
        const Index first = p.at(j - 1);
        const Index last = (j == p.ell() + 1) ? p.n() : p.at(j) - 1;
        const std::size_t begin = depth + static_cast<std::size_t>(first) - 1;
        const std::size_t end = depth + static_cast<std::size_t>(last);
        out.push_back({j, first, last, full.subspan(begin - depth, depth), full.subspan(begin, end - begin)});
    }
    return out;
}

/// log pi(p | l) = log[ prod_{j=0}^{l} (p_{j+1} - p_j - 1) / C(n-2, 2l+1) ].
/// kLogZero when two points are adjacent. For l = 0 this is log 1.
inline double log_prior_positions(const ChangePoints& p) {
    const std::size_t ell = p.ell();
    double log_prod = 0.0;
    for (std::size_t j = 0; j <= ell; ++j) {
        const Index gap = p.at(j + 1) - p.at(j) - 1;
        if (gap <= 0) return kLogZero;
        log_prod += std::log(static_cast<double>(gap));
    }
    return log_prod - log_binomial(p.n() - 2, 2 * static_cast<Index>(ell) + 1);
}

/// Sum of log segment-length factors, the p-dependent part of the location prior.
inline double log_gap_product(const ChangePoints& p) {
    double log_prod = 0.0;
    for (std::size_t j = 0; j <= p.ell(); ++j) {
        const Index gap = p.at(j + 1) - p.at(j) - 1;
        if (gap <= 0) return kLogZero;
        log_prod += std::log(static_cast<double>(gap));
    }
    return log_prod;
}

/// Uniform prior on {0, ..., l_max}.
inline double log_prior_count(std::size_t ell, std::size_t ell_max) {
    if (ell > ell_max) throw std::invalid_argument("number of change-points exceeds l_max");
    return -std::log(1.0 + static_cast<double>(ell_max));
}

/// LRU map from segment (first, last) to its log evidence.
class EvidenceCache {
public:
    static constexpr std::size_t kDefaultCapacity = 1'000'000;

    explicit EvidenceCache(std::size_t capacity = kDefaultCapacity) : capacity_(capacity) {}

    std::optional<double> get(Index first, Index last) {
        auto it = index_.find(key(first, last));
        if (it == index_.end()) {
            ++misses_;
            return std::nullopt;
        }
        ++hits_;
        order_.splice(order_.begin(), order_, it->second);
        return it->second->value;
    }

    void put(Index first, Index last, double value) {
        if (capacity_ == 0) return;
        const std::uint64_t k = key(first, last);
        if (auto it = index_.find(k); it != index_.end()) {
            it->second->value = value;
            order_.splice(order_.begin(), order_, it->second);
            return;
        }
        if (index_.size() >= capacity_) {
            index_.erase(order_.back().key);
            order_.pop_back();
        }
        order_.push_front({k, value});
        index_.emplace(k, order_.begin());
    }

    void clear() {
        order_.clear();
        index_.clear();
        hits_ = misses_ = 0;
    }

    std::size_t size() const { return index_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }

private:
    struct Entry {
        std::uint64_t key;
        double value;
    };
    static std::uint64_t key(Index first, Index last) {
        return (static_cast<std::uint64_t>(first) << 32) ^ static_cast<std::uint64_t>(last);
    }

    std::size_t capacity_;
    std::list<Entry> order_;
    std::unordered_map<std::uint64_t, std::list<Entry>::iterator> index_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

/// Evaluates segment evidences of one sequence under fixed (D, beta),
/// memoized in an owned cache. One scorer per chain; not thread-safe.
class SegmentScorer {
public:
    SegmentScorer(const Sequence& x, const BctParams& params,
                  std::size_t cache_capacity = EvidenceCache::kDefaultCapacity)
        : x_(&x), params_(params), tree_(params), cache_(cache_capacity) {
        if (x.context_length() != params.depth) throw std::invalid_argument("sequence context length differs from D");
        if (x.alphabet_size() != params.alphabet_size)
            throw std::invalid_argument("sequence alphabet size differs from the model's");
        if (x.n() >= (std::size_t(1) << 31)) throw std::invalid_argument("sequence too long");
    }

    const Sequence& sequence() const { return *x_; }
    const BctParams& params() const { return params_; }
    Index n() const { return static_cast<Index>(x_->n()); }
    EvidenceCache& cache() { return cache_; }
    const EvidenceCache& cache() const { return cache_; }

    /// log P*_D of x_first..x_last with its preceding D symbols as context.
    double segment_log_evidence(Index first, Index last) {
        if (auto hit = cache_.get(first, last)) return *hit;
        const double v = compute(first, last);
        cache_.put(first, last, v);
        return v;
    }

    /// Uncached evaluation, for spot checks.
    double compute(Index first, Index last) {
        if (first < 1 || last > n() || first > last) throw std::invalid_argument("segment out of range");
        const std::size_t depth = params_.depth;
        tree_.assign(x_->full(), depth + static_cast<std::size_t>(first) - 1, depth + static_cast<std::size_t>(last));
        return tree_.log_evidence();
    }

    /// log P(x | p): sum of the segment evidences.
    double log_joint_evidence(const ChangePoints& p) {
        if (p.n() != n()) throw std::invalid_argument("change-points built for another length");
        double total = 0.0;
        for (std::size_t j = 1; j <= p.ell() + 1; ++j) {
            const Index first = p.at(j - 1);
            const Index last = (j == p.ell() + 1) ? p.n() : p.at(j) - 1;
            total += segment_log_evidence(first, last);
        }
        return total;
    }

    /// log P(x|p) + log pi(p|l) [+ log pi(l) when l_max is given]. The
    /// evidence is skipped for zero-prior configurations.
    double log_posterior_unnorm(const ChangePoints& p, std::optional<std::size_t> ell_max = std::nullopt) {
        double v = log_prior_positions(p);
        if (is_log_zero(v)) return kLogZero;
        if (ell_max) v += log_prior_count(p.ell(), *ell_max);
        return v + log_joint_evidence(p);
    }

private:
    const Sequence* x_;
    BctParams params_;
    ContextTree tree_;
    EvidenceCache cache_;
};

inline double log_joint_evidence(const Sequence& x, const ChangePoints& p, SegmentScorer& scorer) {
    if (&scorer.sequence() != &x) throw std::invalid_argument("scorer bound to another sequence");
    return scorer.log_joint_evidence(p);
}

/// Exact posterior of a single change-point, indexed by p - 2 for p in 2..n-1.
/// Prefix evidences come from one sequential pass; suffixes are rebuilt per p.
inline std::vector<double> exact_single_cp_posterior(const Sequence& x, const BctParams& params) {
    const Index n = static_cast<Index>(x.n());
    if (n < 4) throw std::invalid_argument("exact posterior needs n >= 4");
    if (x.context_length() != params.depth) throw std::invalid_argument("sequence context length differs from D");
    const std::size_t depth = params.depth;
    const auto full = x.full();

    // prefix[k] = log P*(x_1..x_k)
    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    SequentialCtw seq(params);
    for (Index k = 1; k <= n; ++k) prefix[static_cast<std::size_t>(k)] = seq.append(full, depth + k - 1);

    ContextTree tree(params);
    std::vector<double> logpost(static_cast<std::size_t>(n - 2), kLogZero);
    for (Index p = 2; p <= n - 1; ++p) {
        const double prior = log_prior_positions(ChangePoints(n, {p}));
        if (is_log_zero(prior)) continue;
        tree.assign(full, depth + static_cast<std::size_t>(p) - 1, full.size());
        logpost[static_cast<std::size_t>(p - 2)] = prefix[static_cast<std::size_t>(p - 1)] + tree.log_evidence() + prior;
    }
    const double norm = log_sum_exp(logpost);
    std::vector<double> post(logpost.size());
    for (std::size_t k = 0; k < logpost.size(); ++k) post[k] = is_log_zero(logpost[k]) ? 0.0 : std::exp(logpost[k] - norm);
    return post;
}

}  // namespace bctseg
