#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bctseg/kt.hpp"
#include "bctseg/log_math.hpp"
#include "bctseg/sequence.hpp"
#include "bctseg/tree_model.hpp"

namespace bctseg {

inline constexpr std::size_t kMaxDepth = 20;

/// Hyperparameters of the context-tree prior over proper trees of depth <= D:
/// pi(T) = alpha^(|T|-1) * beta^(|T| - L_D(T)),  alpha = (1 - beta)^(1/(m-1)).
struct BctParams {
    std::size_t alphabet_size = 2;
    std::size_t depth = 0;
    double beta = 0.5;

    static double default_beta(std::size_t m) { return 1.0 - std::ldexp(1.0, -static_cast<int>(m) + 1); }

    static BctParams with_default_beta(std::size_t m, std::size_t depth) {
        return BctParams{m, depth, default_beta(m)};
    }

    double alpha() const { return std::pow(1.0 - beta, 1.0 / static_cast<double>(alphabet_size - 1)); }
    double log_beta() const { return std::log(beta); }
    double log_one_minus_beta() const { return std::log1p(-beta); }

    void validate() const {
        if (alphabet_size < 2) throw std::invalid_argument("alphabet size must be at least 2");
        if (depth > kMaxDepth) throw std::invalid_argument("depth above " + std::to_string(kMaxDepth));
        if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
    }
};

/// Count tree over one stretch of a sequence, with the weighted (CTW) and
/// maximizing (BCT) recursions evaluated on construction.
///
/// Only contexts that occur in the data get a node. A missing child has
/// Pe = Pw = 1; its maximizing value depends on depth and is tabulated in
/// `empty_log_pm`.
class ContextTree {
public:
    using NodeId = std::int32_t;
    static constexpr NodeId kNone = -1;
    static constexpr NodeId kRoot = 0;

    explicit ContextTree(const BctParams& params) : params_(params), kt_(params.alphabet_size) {
        params_.validate();
        tabulate_empty();
    }

    /// Counts symbols full[begin..end), each with the context read backwards
    /// from full[i-1]. Requires begin >= D.
    ContextTree(const BctParams& params, std::span<const Symbol> full, std::size_t begin, std::size_t end)
        : ContextTree(params) {
        assign(full, begin, end);
    }

    ContextTree(const Sequence& seq, const BctParams& params)
        : ContextTree(params, seq.full(), seq.context_length(), seq.full().size()) {
        if (seq.context_length() != params.depth)
            throw std::invalid_argument("sequence context length differs from D");
        if (seq.alphabet_size() != params.alphabet_size)
            throw std::invalid_argument("sequence alphabet size differs from the model's");
    }

    /// Rebuilds in place, reusing storage.
    void assign(std::span<const Symbol> full, std::size_t begin, std::size_t end) {
        const std::size_t m = params_.alphabet_size;
        const std::size_t depth = params_.depth;
        if (begin < depth) throw std::invalid_argument("segment start leaves fewer than D context symbols");
        if (end < begin || end > full.size()) throw std::invalid_argument("segment range out of bounds");

        counts_.clear();
        children_.clear();
        depth_.clear();
        add_node(0);
        for (std::size_t i = begin; i < end; ++i) {
            const Symbol x = full[i];
            NodeId node = kRoot;
            ++counts_[x];
            for (std::size_t d = 1; d <= depth; ++d) {
                const Symbol c = full[i - d];
                NodeId child = children_[static_cast<std::size_t>(node) * m + c];
                if (child == kNone) {
                    child = add_node(d);
                    children_[static_cast<std::size_t>(node) * m + c] = child;
                }
                node = child;
                ++counts_[static_cast<std::size_t>(node) * m + x];
            }
        }
        evaluate();
    }

    const BctParams& params() const { return params_; }
    std::size_t size() const { return depth_.size(); }

    std::span<const Count> counts(NodeId node) const {
        return std::span(counts_).subspan(static_cast<std::size_t>(node) * params_.alphabet_size,
                                          params_.alphabet_size);
    }
    NodeId child(NodeId node, Symbol s) const {
        return children_[static_cast<std::size_t>(node) * params_.alphabet_size + s];
    }
    std::size_t depth(NodeId node) const { return depth_[static_cast<std::size_t>(node)]; }
    double log_pe(NodeId node) const { return log_pe_[static_cast<std::size_t>(node)]; }
    double log_pw(NodeId node) const { return log_pw_[static_cast<std::size_t>(node)]; }
    double log_pm(NodeId node) const { return log_pm_[static_cast<std::size_t>(node)]; }
    /// True when the maximizing recursion keeps this node internal.
    bool map_split(NodeId node) const { return split_[static_cast<std::size_t>(node)] != 0; }

    /// log P*_D of the counted stretch.
    double log_evidence() const { return log_pw_[kRoot]; }
    /// log of max_T pi(T) * prod_{leaves} Pe.
    double log_map_score() const { return log_pm_[kRoot]; }

    /// Maximizing value of a subtree without data rooted at depth d.
    double empty_log_pm(std::size_t d) const { return empty_log_pm_[d]; }
    bool empty_split(std::size_t d) const { return empty_split_[d] != 0; }

    std::optional<NodeId> find(std::span<const Symbol> context) const {
        NodeId node = kRoot;
        for (Symbol s : context) {
            if (s >= params_.alphabet_size) return std::nullopt;
            node = child(node, s);
            if (node == kNone) return std::nullopt;
        }
        return node;
    }

    /// Counts at a context; zero vector when the context never occurs.
    std::vector<Count> counts_at(const Context& context) const {
        if (auto node = find(context)) {
            auto c = counts(*node);
            return {c.begin(), c.end()};
        }
        return std::vector<Count>(params_.alphabet_size, 0);
    }

private:
    NodeId add_node(std::size_t d) {
        const std::size_t m = params_.alphabet_size;
        counts_.insert(counts_.end(), m, 0);
        children_.insert(children_.end(), m, kNone);
        depth_.push_back(static_cast<std::uint8_t>(d));
        return static_cast<NodeId>(depth_.size() - 1);
    }

    void tabulate_empty() {
        const std::size_t depth = params_.depth;
        const double lb = params_.log_beta();
        const double l1b = params_.log_one_minus_beta();
        empty_log_pm_.assign(depth + 1, 0.0);
        empty_split_.assign(depth + 1, 0);
        for (std::size_t d = depth; d-- > 0;) {
            const double split = l1b + static_cast<double>(params_.alphabet_size) * empty_log_pm_[d + 1];
            empty_split_[d] = split > lb;
            empty_log_pm_[d] = std::max(lb, split);
        }
    }

    // Children always carry larger ids than their parent, so a reverse sweep
    // is a post-order traversal.
    void evaluate() {
        const std::size_t m = params_.alphabet_size;
        const std::size_t nodes = depth_.size();
        const double lb = params_.log_beta();
        const double l1b = params_.log_one_minus_beta();
        log_pe_.resize(nodes);
        log_pw_.resize(nodes);
        log_pm_.resize(nodes);
        split_.assign(nodes, 0);
        for (std::size_t k = nodes; k-- > 0;) {
            const double pe = kt_.log_pe(std::span(counts_).subspan(k * m, m));
            log_pe_[k] = pe;
            const std::size_t d = depth_[k];
            if (d == params_.depth) {
                log_pw_[k] = pe;
                log_pm_[k] = pe;
                continue;
            }
            double pw_children = 0.0;
            double pm_children = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const NodeId c = children_[k * m + j];
                if (c == kNone) {
                    pm_children += empty_log_pm_[d + 1];
                } else {
                    pw_children += log_pw_[static_cast<std::size_t>(c)];
                    pm_children += log_pm_[static_cast<std::size_t>(c)];
                }
            }
            log_pw_[k] = log_add(lb + pe, l1b + pw_children);
            const double leaf = lb + pe;
            const double split = l1b + pm_children;
            split_[k] = split > leaf;
            log_pm_[k] = split_[k] ? split : leaf;
        }
    }

    BctParams params_;
    KtTable kt_;
    std::vector<Count> counts_;
    std::vector<NodeId> children_;
    std::vector<std::uint8_t> depth_;
    std::vector<double> log_pe_, log_pw_, log_pm_;
    std::vector<std::uint8_t> split_;
    std::vector<double> empty_log_pm_;
    std::vector<std::uint8_t> empty_split_;
};

inline ContextTree build_counts(const Sequence& seq, const BctParams& params) { return ContextTree(seq, params); }

/// log P*_D(x): the evidence averaged over all trees of depth <= D and their parameters.
inline double ctw_log_evidence(const Sequence& seq, const BctParams& params) {
    return ContextTree(seq, params).log_evidence();
}

/// MAP tree from the maximizing recursion. A node stays internal only when
/// splitting strictly beats stopping, so ties resolve to the smaller model.
/// With `with_params` every leaf gets its Dirichlet(1/2) posterior mean.
inline TreeModel map_tree(const ContextTree& tree, bool with_params = true) {
    const std::size_t m = tree.params().alphabet_size;
    std::vector<Context> leaves;
    std::map<Context, std::vector<double>> params;
    const std::vector<Count> zero(m, 0);

    auto emit_leaf = [&](const Context& ctx, std::span<const Count> counts) {
        leaves.push_back(ctx);
        if (with_params) params.emplace(ctx, leaf_posterior_mean(counts));
    };
    // Explicit stack; empty subtrees expand from the tabulated decisions.
    struct Item {
        Context ctx;
        ContextTree::NodeId node;
    };
    std::vector<Item> stack{{Context{}, ContextTree::kRoot}};
    while (!stack.empty()) {
        Item item = std::move(stack.back());
        stack.pop_back();
        const std::size_t d = item.ctx.size();
        const bool present = item.node != ContextTree::kNone;
        const bool split = present ? tree.map_split(item.node) : tree.empty_split(d);
        if (!split) {
            emit_leaf(item.ctx, present ? tree.counts(item.node) : std::span<const Count>(zero));
            continue;
        }
        for (std::size_t j = m; j-- > 0;) {
            Context c = item.ctx;
            c.push_back(static_cast<Symbol>(j));
            const auto child = present ? tree.child(item.node, static_cast<Symbol>(j)) : ContextTree::kNone;
            stack.push_back({std::move(c), child});
        }
    }
    return TreeModel(m, std::move(leaves), std::move(params));
}

inline TreeModel map_tree(const Sequence& seq, const BctParams& params, bool with_params = true) {
    return map_tree(ContextTree(seq, params), with_params);
}

/// Log prior of a tree: (|T| - 1) log alpha + (|T| - L_D(T)) log beta.
inline double log_tree_prior(const TreeModel& tree, const BctParams& params) {
    const double leaves = static_cast<double>(tree.num_leaves());
    const double at_depth = static_cast<double>(tree.leaves_at_depth(params.depth));
    const double log_alpha = params.log_one_minus_beta() / static_cast<double>(params.alphabet_size - 1);
    return (leaves - 1.0) * log_alpha + (leaves - at_depth) * params.log_beta();
}

/// Sequential CTW: appends one symbol at a time and keeps log P*_D of the
/// prefix seen so far. Costs O(D m) per symbol.
class SequentialCtw {
public:
    explicit SequentialCtw(const BctParams& params) : params_(params) {
        params_.validate();
        add_node();
        path_.resize(params_.depth + 1);
    }

    /// Appends full[index], whose context is full[index-1], full[index-2], ...
    /// Returns the updated log evidence.
    double append(std::span<const Symbol> full, std::size_t index) {
        const std::size_t m = params_.alphabet_size;
        const std::size_t depth = params_.depth;
        if (index < depth) throw std::invalid_argument("not enough context before index");
        const Symbol x = full[index];
        const double half_m = static_cast<double>(m) / 2.0;

        NodeId node = 0;
        for (std::size_t d = 0;; ++d) {
            path_[d] = node;
            auto& n = nodes_[static_cast<std::size_t>(node)];
            Count* a = &counts_[static_cast<std::size_t>(node) * m];
            n.log_pe += std::log((a[x] + 0.5) / (static_cast<double>(n.total) + half_m));
            ++a[x];
            ++n.total;
            if (d == depth) break;
            const Symbol c = full[index - d - 1];
            NodeId next = children_[static_cast<std::size_t>(node) * m + c];
            if (next < 0) {
                next = add_node();
                children_[static_cast<std::size_t>(node) * m + c] = next;
            }
            node = next;
        }
        const double lb = params_.log_beta();
        const double l1b = params_.log_one_minus_beta();
        for (std::size_t d = depth + 1; d-- > 0;) {
            const auto k = static_cast<std::size_t>(path_[d]);
            auto& n = nodes_[k];
            if (d == depth) {
                n.log_pw = n.log_pe;
                continue;
            }
            double children = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const NodeId c = children_[k * m + j];
                if (c >= 0) children += nodes_[static_cast<std::size_t>(c)].log_pw;
            }
            n.log_pw = log_add(lb + n.log_pe, l1b + children);
        }
        return nodes_[0].log_pw;
    }

    double log_evidence() const { return nodes_[0].log_pw; }

private:
    using NodeId = std::int32_t;
    struct Node {
        double log_pe = 0.0;
        double log_pw = 0.0;
        std::uint64_t total = 0;
    };

    NodeId add_node() {
        nodes_.emplace_back();
        counts_.insert(counts_.end(), params_.alphabet_size, 0);
        children_.insert(children_.end(), params_.alphabet_size, -1);
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    BctParams params_;
    std::vector<Node> nodes_;
    std::vector<Count> counts_;
    std::vector<NodeId> children_;
    std::vector<NodeId> path_;
};

}  // namespace bctseg
