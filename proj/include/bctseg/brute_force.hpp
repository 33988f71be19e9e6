#pragma once

// Direct enumeration over the model class of proper trees of depth <= D.
// Exponential in D; used to check the tree recursions on small instances.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bctseg/context_tree.hpp"
#include "bctseg/kt.hpp"
#include "bctseg/log_math.hpp"
#include "bctseg/sequence.hpp"
#include "bctseg/tree_model.hpp"

namespace bctseg {

inline constexpr double kMaxEnumeratedTrees = 2e6;

/// |T(D)| from |T(0)| = 1, |T(d+1)| = |T(d)|^m + 1, as a double to survive overflow.
inline double count_proper_trees(std::size_t m, std::size_t depth) {
    double count = 1.0;
    for (std::size_t d = 0; d < depth; ++d) count = std::pow(count, static_cast<double>(m)) + 1.0;
    return count;
}

namespace detail {

inline void enumerate_subtrees(const Context& prefix, std::size_t m, std::size_t depth,
                               std::vector<std::vector<Context>>& out) {
    out.push_back({prefix});
    if (prefix.size() == depth) return;
    // Cartesian product of the children's subtree lists.
    std::vector<std::vector<std::vector<Context>>> per_child(m);
    for (std::size_t j = 0; j < m; ++j) {
        Context c = prefix;
        c.push_back(static_cast<Symbol>(j));
        enumerate_subtrees(c, m, depth, per_child[j]);
    }
    std::vector<std::size_t> pick(m, 0);
    for (;;) {
        std::vector<Context> leaves;
        for (std::size_t j = 0; j < m; ++j) {
            const auto& sub = per_child[j][pick[j]];
            leaves.insert(leaves.end(), sub.begin(), sub.end());
        }
        out.push_back(std::move(leaves));
        std::size_t j = 0;
        while (j < m && ++pick[j] == per_child[j].size()) pick[j++] = 0;
        if (j == m) break;
    }
}

}  // namespace detail

/// Every proper m-ary tree of depth <= D, each as its leaf list.
inline std::vector<TreeModel> enumerate_trees(std::size_t m, std::size_t depth) {
    if (count_proper_trees(m, depth) > kMaxEnumeratedTrees)
        throw std::invalid_argument("model class too large to enumerate");
    std::vector<std::vector<Context>> leaf_lists;
    detail::enumerate_subtrees({}, m, depth, leaf_lists);
    std::vector<TreeModel> trees;
    trees.reserve(leaf_lists.size());
    for (auto& leaves : leaf_lists) trees.emplace_back(m, std::move(leaves));
    return trees;
}

/// Counts of the symbols in full[begin..end) that follow `context`, found by
/// scanning the data directly.
inline std::vector<Count> scan_counts(std::span<const Symbol> full, std::size_t begin, std::size_t end,
                                      const Context& context, std::size_t m) {
    std::vector<Count> counts(m, 0);
    for (std::size_t i = begin; i < end; ++i) {
        bool match = true;
        for (std::size_t d = 0; d < context.size() && match; ++d) match = full[i - d - 1] == context[d];
        if (match) ++counts[full[i]];
    }
    return counts;
}

/// log of pi(T) * prod_{leaves s} Pe(a_s) for one tree.
inline double log_tree_score(const TreeModel& tree, std::span<const Symbol> full, std::size_t begin,
                             std::size_t end, const BctParams& params) {
    double score = log_tree_prior(tree, params);
    for (const auto& leaf : tree.leaves())
        score += kt_log_prob(scan_counts(full, begin, end, leaf, params.alphabet_size));
    return score;
}

/// log sum_T pi(T) prod_s Pe(a_s) by explicit enumeration.
inline double brute_force_evidence(std::span<const Symbol> full, std::size_t begin, std::size_t end,
                                   const BctParams& params) {
    params.validate();
    std::vector<double> terms;
    for (const auto& tree : enumerate_trees(params.alphabet_size, params.depth))
        terms.push_back(log_tree_score(tree, full, begin, end, params));
    return log_sum_exp(terms);
}

inline double brute_force_evidence(const Sequence& seq, const BctParams& params) {
    return brute_force_evidence(seq.full(), seq.context_length(), seq.full().size(), params);
}

struct EnumeratedMap {
    TreeModel tree;
    double log_score;
};

/// The highest scoring tree by enumeration; among equal scores the one with
/// fewer leaves wins.
inline EnumeratedMap brute_force_map(const Sequence& seq, const BctParams& params) {
    std::optional<EnumeratedMap> best;
    for (auto& tree : enumerate_trees(params.alphabet_size, params.depth)) {
        const double s = log_tree_score(tree, seq.full(), seq.context_length(), seq.full().size(), params);
        if (!best || s > best->log_score ||
            (s == best->log_score && tree.num_leaves() < best->tree.num_leaves()))
            best = EnumeratedMap{std::move(tree), s};
    }
    return std::move(*best);
}

}  // namespace bctseg
