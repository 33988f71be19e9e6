#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bctseg/changepoint.hpp"
#include "bctseg/rng.hpp"
#include "bctseg/sequence.hpp"
#include "bctseg/tree_model.hpp"

namespace bctseg {

/// Trie over a parameterized tree for O(depth) leaf lookup.
class ContextSampler {
public:
    explicit ContextSampler(const TreeModel& model) : m_(model.alphabet_size()), depth_(model.depth()) {
        nodes_.push_back(Node{std::vector<std::int32_t>(m_, -1), -1});
        for (const auto& leaf : model.leaves()) {
            std::size_t node = 0;
            for (Symbol s : leaf) {
                auto& next = nodes_[node].children[s];
                if (next < 0) {
                    next = static_cast<std::int32_t>(nodes_.size());
                    nodes_.push_back(Node{std::vector<std::int32_t>(m_, -1), -1});
                }
                node = static_cast<std::size_t>(nodes_[node].children[s]);
            }
            const auto& theta = model.theta(leaf);
            nodes_[node].leaf = static_cast<std::int32_t>(cdfs_.size());
            std::vector<double> cdf(m_);
            double acc = 0.0;
            for (std::size_t j = 0; j < m_; ++j) cdf[j] = (acc += theta[j]);
            cdfs_.push_back(std::move(cdf));
        }
    }

    std::size_t depth() const { return depth_; }

    /// Leaf reached from the symbols preceding full[index], read backwards.
    const std::vector<double>& leaf_cdf(std::span<const Symbol> full, std::size_t index) const {
        std::size_t node = 0;
        for (std::size_t d = 0;; ++d) {
            if (nodes_[node].leaf >= 0) return cdfs_[static_cast<std::size_t>(nodes_[node].leaf)];
            if (d >= index) throw std::invalid_argument("context too short to reach a leaf");
            const auto next = nodes_[node].children[full[index - d - 1]];
            if (next < 0) throw std::invalid_argument("malformed model: no leaf on context path");
            node = static_cast<std::size_t>(next);
        }
    }

    Symbol draw(const std::vector<double>& cdf, Rng& rng) const {
        const double u = rng.uniform01() * cdf.back();
        for (std::size_t j = 0; j + 1 < m_; ++j)
            if (u < cdf[j]) return static_cast<Symbol>(j);
        return static_cast<Symbol>(m_ - 1);
    }

private:
    struct Node {
        std::vector<std::int32_t> children;
        std::int32_t leaf;
    };
    std::size_t m_;
    std::size_t depth_;
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> cdfs_;
};

/// Next symbol given the history full[0..index): walks the tree from the
/// root along x_{index-1}, x_{index-2}, ... to a leaf and draws from its theta.
inline Symbol sample_next(const TreeModel& model, std::span<const Symbol> history, Rng& rng) {
    ContextSampler sampler(model);
    return sampler.draw(sampler.leaf_cdf(history, history.size()), rng);
}

struct SegmentSpec {
    TreeModel model;
    std::size_t length;
};

struct PiecewiseSpec {
    Alphabet alphabet;
    std::size_t depth;
    std::vector<SegmentSpec> segments;
    std::vector<Symbol> initial_context;  // empty means all zeros
    std::uint64_t seed = 0;

    std::size_t total_length() const {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.length;
        return n;
    }

    /// Segment k >= 2 starts at observation 1 + (sum of earlier lengths).
    std::vector<Index> change_points() const {
        std::vector<Index> cps;
        Index start = 1;
        for (std::size_t k = 0; k + 1 < segments.size(); ++k) {
            start += static_cast<Index>(segments[k].length);
            cps.push_back(start);
        }
        return cps;
    }

    void validate() const {
        if (segments.empty()) throw std::invalid_argument("spec has no segments");
        for (const auto& s : segments) {
            if (s.model.alphabet_size() != alphabet.size()) throw std::invalid_argument("segment alphabet mismatch");
            if (s.model.depth() > depth) throw std::invalid_argument("segment model deeper than D");
            if (s.length == 0) throw std::invalid_argument("segment of length zero");
            for (const auto& leaf : s.model.leaves())
                if (!s.model.params().count(leaf)) throw std::invalid_argument("segment leaf without parameters");
        }
        if (!initial_context.empty() && initial_context.size() != depth)
            throw std::invalid_argument("initial context length differs from D");
    }
};

struct GeneratedSeries {
    Sequence sequence;
    std::vector<Index> change_points;
};

/// Emits the segments back to back; each segment draws its context from the
/// tail of whatever came before it.
inline GeneratedSeries generate_piecewise(const PiecewiseSpec& spec) {
    spec.validate();
    std::vector<Symbol> full = spec.initial_context.empty() ? std::vector<Symbol>(spec.depth, 0) : spec.initial_context;
    full.reserve(spec.depth + spec.total_length());
    Rng rng(spec.seed);
    for (const auto& seg : spec.segments) {
        ContextSampler sampler(seg.model);
        for (std::size_t k = 0; k < seg.length; ++k) full.push_back(sampler.draw(sampler.leaf_cdf(full, full.size()), rng));
    }
    std::vector<Symbol> context(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(spec.depth));
    std::vector<Symbol> obs(full.begin() + static_cast<std::ptrdiff_t>(spec.depth), full.end());
    return {Sequence(spec.alphabet, std::move(context), std::move(obs)), spec.change_points()};
}

/// The four ternary models of the synthetic benchmark, contexts most recent
/// first, with segment lengths placing change-points at 2500, 3500 and 4000
/// (n = 4300).
inline PiecewiseSpec synthetic_benchmark_spec(std::uint64_t seed = 2022, std::size_t depth = 10) {
    auto model = [](std::vector<std::pair<Context, std::vector<double>>> rows) {
        std::vector<Context> leaves;
        std::map<Context, std::vector<double>> params;
        for (auto& [c, t] : rows) {
            leaves.push_back(c);
            params.emplace(c, t);
        }
        return TreeModel(3, std::move(leaves), std::move(params));
    };
    TreeModel m1 = model({{{0}, {0.3, 0.4, 0.3}},
                          {{2}, {0.5, 0.3, 0.2}},
                          {{1, 0}, {0.2, 0.5, 0.3}},
                          {{1, 1}, {0.1, 0.4, 0.5}},
                          {{1, 2, 1}, {0.7, 0.2, 0.1}},
                          {{1, 2, 2}, {0.4, 0.2, 0.4}},
                          {{1, 2, 0, 0}, {0.6, 0.1, 0.3}},
                          {{1, 2, 0, 1}, {0.3, 0.5, 0.2}},
                          {{1, 2, 0, 2}, {0.4, 0.1, 0.5}}});
    TreeModel m2 = model({{{0}, {0.4, 0.5, 0.1}},
                          {{2}, {0.4, 0.4, 0.2}},
                          {{1, 0}, {0.4, 0.2, 0.4}},
                          {{1, 1}, {0.2, 0.4, 0.4}},
                          {{1, 2}, {0.6, 0.1, 0.3}}});
    TreeModel m3 = model({{{0}, {0.5, 0.3, 0.2}}, {{1}, {0.3, 0.6, 0.1}}, {{2}, {0.3, 0.2, 0.5}}});
    TreeModel m4 = TreeModel::root_only(3, std::vector<double>{0.4, 0.2, 0.4});
    return PiecewiseSpec{Alphabet::numeric(3),
                         depth,
                         {{m1, 2499}, {m2, 1000}, {m3, 500}, {m4, 301}},
                         {},
                         seed};
}

namespace detail {

/// Number of closed communicating classes of a kernel with out-degree <= m;
/// edge(s, j) returns the j-th successor of s or -1. Kosaraju, iterative.
template <class Edge>
std::size_t closed_class_count(std::size_t states, std::size_t m, Edge edge) {
    std::vector<std::vector<std::size_t>> radj(states);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t j = 0; j < m; ++j)
            if (auto t = edge(s, j); t >= 0) radj[static_cast<std::size_t>(t)].push_back(s);

    std::vector<std::size_t> order;
    order.reserve(states);
    std::vector<char> seen(states, 0);
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t root = 0; root < states; ++root) {
        if (seen[root]) continue;
        seen[root] = 1;
        stack.push_back({root, 0});
        while (!stack.empty()) {
            auto& [s, j] = stack.back();
            if (j == m) {
                order.push_back(s);
                stack.pop_back();
                continue;
            }
            const auto t = edge(s, j++);
            if (t >= 0 && !seen[static_cast<std::size_t>(t)]) {
                seen[static_cast<std::size_t>(t)] = 1;
                stack.push_back({static_cast<std::size_t>(t), 0});
            }
        }
    }
    std::vector<std::int64_t> comp(states, -1);
    std::int64_t ncomp = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] >= 0) continue;
        std::vector<std::size_t> st{*it};
        comp[*it] = ncomp;
        while (!st.empty()) {
            auto s = st.back();
            st.pop_back();
            for (auto t : radj[s])
                if (comp[t] < 0) comp[t] = ncomp, st.push_back(t);
        }
        ++ncomp;
    }
    std::vector<char> open(static_cast<std::size_t>(ncomp), 0);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t j = 0; j < m; ++j)
            if (auto t = edge(s, j); t >= 0 && comp[static_cast<std::size_t>(t)] != comp[s])
                open[static_cast<std::size_t>(comp[s])] = 1;
    return static_cast<std::size_t>(std::count(open.begin(), open.end(), 0));
}

}  // namespace detail

/// First-order marginal of the stationary law of a parameterized tree model.
///
/// The chain runs on the last d = depth(model) symbols (most recent first);
/// its kernel shifts in one symbol drawn from the matching leaf. Requires a
/// single closed communicating class. Small kernels are solved directly,
/// larger ones by power iteration on the lazy kernel (P + I) / 2.
inline std::vector<double> stationary_marginal(const TreeModel& model) {
    const std::size_t m = model.alphabet_size();
    const std::size_t d = model.depth();
    if (!model.has_params()) throw std::invalid_argument("model has no parameters");
    if (d == 0) return model.theta({});
    const double states_f = std::pow(static_cast<double>(m), static_cast<double>(d));
    if (states_f > 1e6) throw std::invalid_argument("context state space above 1e6 states");
    const std::size_t states = static_cast<std::size_t>(states_f);

    // State code: sum_k s_k m^k with s_0 the most recent symbol.
    std::size_t top = 1;
    for (std::size_t k = 0; k + 1 < d; ++k) top *= m;
    std::vector<const std::vector<double>*> theta(states);
    std::vector<Symbol> ctx(d);
    for (std::size_t s = 0; s < states; ++s) {
        std::size_t code = s;
        for (std::size_t k = 0; k < d; ++k) {
            ctx[k] = static_cast<Symbol>(code % m);
            code /= m;
        }
        auto leaf = model.find_leaf(ctx);
        if (!leaf) throw std::invalid_argument("malformed model: context reaches no leaf");
        theta[s] = &model.theta(model.leaves()[*leaf]);
    }
    auto next_state = [&](std::size_t s, std::size_t j) { return j + m * (s % top); };

    if (detail::closed_class_count(states, m, [&](std::size_t s, std::size_t j) {
            return (*theta[s])[j] > 0.0 ? static_cast<std::ptrdiff_t>(next_state(s, j)) : std::ptrdiff_t(-1);
        }) != 1)
        throw std::runtime_error("context chain has no unique stationary distribution");

    std::vector<double> pi(states, 1.0 / static_cast<double>(states));
    if (states <= 1024) {
        // Solve pi (P - I) = 0 with sum(pi) = 1: replace the last equation by normalization.
        std::vector<double> a(states * (states + 1), 0.0);
        auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * (states + 1) + c]; };
        for (std::size_t s = 0; s < states; ++s) {
            for (std::size_t j = 0; j < m; ++j) A(next_state(s, j), s) += (*theta[s])[j];
            A(s, s) -= 1.0;
        }
        for (std::size_t c = 0; c < states; ++c) A(states - 1, c) = 1.0;
        A(states - 1, states) = 1.0;
        for (std::size_t col = 0; col < states; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < states; ++r)
                if (std::abs(A(r, col)) > std::abs(A(piv, col))) piv = r;
            if (std::abs(A(piv, col)) < 1e-300) throw std::runtime_error("singular stationary system");
            if (piv != col)
                for (std::size_t c = 0; c <= states; ++c) std::swap(A(piv, c), A(col, c));
            for (std::size_t r = 0; r < states; ++r) {
                if (r == col || A(r, col) == 0.0) continue;
                const double f = A(r, col) / A(col, col);
                for (std::size_t c = col; c <= states; ++c) A(r, c) -= f * A(col, c);
            }
        }
        for (std::size_t s = 0; s < states; ++s) pi[s] = std::max(0.0, A(s, states) / A(s, s));
    } else {
        std::vector<double> next(states);
        bool converged = false;
        for (std::size_t it = 0; it < 1'000'000 && !converged; ++it) {
            for (std::size_t s = 0; s < states; ++s) next[s] = 0.5 * pi[s];
            for (std::size_t s = 0; s < states; ++s)
                for (std::size_t j = 0; j < m; ++j) next[next_state(s, j)] += 0.5 * pi[s] * (*theta[s])[j];
            double diff = 0.0;
            for (std::size_t s = 0; s < states; ++s) diff = std::max(diff, std::abs(next[s] - pi[s]));
            pi.swap(next);
            converged = diff < 1e-12;
        }
        if (!converged) throw std::runtime_error("power iteration did not converge");
    }
    double total = 0.0;
    for (double v : pi) total += v;
    std::vector<double> marginal(m, 0.0);
    for (std::size_t s = 0; s < states; ++s) marginal[s % m] += pi[s] / total;
    return marginal;
}

}  // namespace bctseg
