#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bctseg/sequence.hpp"

namespace bctseg {

/// A context, most recent symbol first: {1, 0} means x_{i-1} = 1, x_{i-2} = 0.
using Context = std::vector<Symbol>;

/// Proper m-ary context tree given by its leaves, optionally with a next-symbol
/// distribution per leaf.
class TreeModel {
public:
    TreeModel(std::size_t alphabet_size, std::vector<Context> leaves,
              std::map<Context, std::vector<double>> params = {})
        : m_(alphabet_size), leaves_(std::move(leaves)), params_(std::move(params)) {
        std::sort(leaves_.begin(), leaves_.end());
        validate();
    }

    /// The single-node tree {lambda}.
    static TreeModel root_only(std::size_t alphabet_size, std::optional<std::vector<double>> theta = std::nullopt) {
        std::map<Context, std::vector<double>> params;
        if (theta) params.emplace(Context{}, *theta);
        return TreeModel(alphabet_size, {Context{}}, std::move(params));
    }

    std::size_t alphabet_size() const { return m_; }
    const std::vector<Context>& leaves() const { return leaves_; }
    std::size_t num_leaves() const { return leaves_.size(); }
    bool has_params() const { return !params_.empty(); }
    const std::map<Context, std::vector<double>>& params() const { return params_; }

    /// Maximum leaf depth.
    std::size_t depth() const {
        std::size_t d = 0;
        for (const auto& l : leaves_) d = std::max(d, l.size());
        return d;
    }

    std::size_t leaves_at_depth(std::size_t d) const {
        return static_cast<std::size_t>(
            std::count_if(leaves_.begin(), leaves_.end(), [d](const Context& c) { return c.size() == d; }));
    }

    /// Internal nodes (proper prefixes of leaves), sorted.
    std::vector<Context> internal_nodes() const {
        std::set<Context> inner;
        for (const auto& l : leaves_)
            for (std::size_t k = 0; k < l.size(); ++k) inner.emplace(l.begin(), l.begin() + k);
        return {inner.begin(), inner.end()};
    }

    /// All nodes, internal and leaves, sorted.
    std::vector<Context> all_nodes() const {
        auto nodes = internal_nodes();
        nodes.insert(nodes.end(), leaves_.begin(), leaves_.end());
        std::sort(nodes.begin(), nodes.end());
        return nodes;
    }

    /// Index of the leaf matching a history read most recent first, or
    /// nullopt when the history is too short to reach a leaf.
    std::optional<std::size_t> find_leaf(std::span<const Symbol> recent_first) const {
        for (std::size_t i = 0; i < leaves_.size(); ++i) {
            const auto& l = leaves_[i];
            if (l.size() <= recent_first.size() && std::equal(l.begin(), l.end(), recent_first.begin())) return i;
        }
        return std::nullopt;
    }

    const std::vector<double>& theta(const Context& leaf) const {
        auto it = params_.find(leaf);
        if (it == params_.end()) throw std::out_of_range("leaf has no parameter vector");
        return it->second;
    }

    bool operator==(const TreeModel& o) const { return m_ == o.m_ && leaves_ == o.leaves_ && params_ == o.params_; }

private:
    void validate() const {
        if (m_ < 2) throw std::invalid_argument("alphabet size must be at least 2");
        if (leaves_.empty()) throw std::invalid_argument("tree has no leaves");
        std::set<Context> leafset(leaves_.begin(), leaves_.end());
        if (leafset.size() != leaves_.size()) throw std::invalid_argument("duplicate leaf context");
        for (const auto& l : leaves_)
            for (Symbol s : l)
                if (s >= m_) throw std::invalid_argument("leaf context symbol outside alphabet");
        const auto inner = internal_nodes();
        for (const auto& u : inner) {
            if (leafset.count(u)) throw std::invalid_argument("leaf context is a prefix of another leaf");
        }
        std::set<Context> innerset(inner.begin(), inner.end());
        for (const auto& u : inner) {
            for (std::size_t j = 0; j < m_; ++j) {
                Context child = u;
                child.push_back(static_cast<Symbol>(j));
                if (!leafset.count(child) && !innerset.count(child))
                    throw std::invalid_argument("tree is not proper: internal node missing a child");
            }
        }
        for (const auto& [ctx, theta] : params_) {
            if (!leafset.count(ctx)) throw std::invalid_argument("parameter vector for a non-leaf context");
            if (theta.size() != m_) throw std::invalid_argument("parameter vector has wrong length");
            double sum = 0.0;
            for (double t : theta) {
                if (!(t >= 0.0)) throw std::invalid_argument("negative probability in parameter vector");
                sum += t;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("parameter vector does not sum to 1");
        }
    }

    std::size_t m_;
    std::vector<Context> leaves_;
    std::map<Context, std::vector<double>> params_;
};

/// Printable form of a context: labels concatenated for single-character
/// alphabets, comma-joined otherwise. The root is "".
inline std::string context_to_string(const Context& ctx, const Alphabet& alphabet) {
    std::string out;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
        if (k && !alphabet.single_char()) out += ',';
        out += alphabet.decode(ctx[k]);
    }
    return out;
}

/// Inverse of context_to_string; "λ" and "lambda" also name the root.
inline Context context_from_string(std::string_view text, const Alphabet& alphabet) {
    if (text.empty() || text == "λ" || text == "lambda") return {};
    Context ctx;
    auto push = [&](std::string_view tok) {
        auto code = alphabet.encode(tok);
        if (!code) throw ParseError("context '" + std::string(text) + "' uses a symbol outside the alphabet");
        ctx.push_back(*code);
    };
    if (alphabet.single_char()) {
        for (std::size_t k = 0; k < text.size(); ++k) push(text.substr(k, 1));
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto end = text.find(',', pos);
            if (end == std::string_view::npos) end = text.size();
            push(text.substr(pos, end - pos));
            pos = end + 1;
        }
    }
    return ctx;
}

}  // namespace bctseg
