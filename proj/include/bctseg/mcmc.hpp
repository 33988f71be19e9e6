#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bctseg/changepoint.hpp"
#include "bctseg/context_tree.hpp"
#include "bctseg/log_math.hpp"
#include "bctseg/rng.hpp"
#include "bctseg/sequence.hpp"

namespace bctseg {

/// Proposal kinds. Uniform and Neighbor keep l fixed.
enum class MoveType { Uniform, Neighbor, Birth, Death };

inline const char* move_name(MoveType m) {
    switch (m) {
        case MoveType::Uniform: return "uniform";
        case MoveType::Neighbor: return "neighbor";
        case MoveType::Birth: return "birth";
        case MoveType::Death: return "death";
    }
    return "?";
}

struct Proposal {
    ChangePoints candidate;
    MoveType move;
};

namespace detail {

/// The k-th position (0-based) of {2, ..., n-1} not in `occupied` (sorted).
inline Index kth_free_position(std::uint64_t k, const std::vector<Index>& occupied) {
    Index pos = 2 + static_cast<Index>(k);
    for (Index q : occupied) {
        if (q <= pos) ++pos;
        else break;
    }
    return pos;
}

inline std::vector<Index> insert_sorted(std::vector<Index> v, Index x) {
    v.insert(std::upper_bound(v.begin(), v.end(), x), x);
    return v;
}

}  // namespace detail

/// Within-l move. Draw order: change-point index, move kind (0 uniform,
/// 1 neighbor), then the free-position index or the direction (0 left,
/// 1 right). A neighbor outside {2..n-1} or already occupied, or a uniform
/// move with no free position, proposes the current state.
inline Proposal propose_fixed(const ChangePoints& p, Rng& rng) {
    const std::size_t ell = p.ell();
    if (ell == 0) throw std::invalid_argument("within-l move needs at least one change-point");
    const Index n = p.n();
    const std::size_t i = static_cast<std::size_t>(rng.uniform_index(ell));
    const bool uniform = rng.uniform_index(2) == 0;
    auto positions = p.positions();
    if (uniform) {
        const Index free = n - static_cast<Index>(ell) - 2;
        if (free <= 0) return {p, MoveType::Uniform};
        const Index np = detail::kth_free_position(rng.uniform_index(static_cast<std::uint64_t>(free)), positions);
        positions.erase(positions.begin() + static_cast<std::ptrdiff_t>(i));
        return {ChangePoints(n, detail::insert_sorted(std::move(positions), np)), MoveType::Uniform};
    }
    const Index np = positions[i] + (rng.uniform_index(2) == 0 ? -1 : 1);
    if (np < 2 || np > n - 1 || p.contains(np)) return {p, MoveType::Neighbor};
    positions[i] = np;
    return {ChangePoints(n, std::move(positions)), MoveType::Neighbor};
}

/// Move for the unknown-l sampler. Draw order: move choice (skipped at l = 0,
/// where birth is forced; uniform over death/birth/within for 1 <= l < l_max;
/// death/within at l = l_max), then the move's own draws.
inline Proposal propose_variable(const ChangePoints& p, std::size_t ell_max, Rng& rng) {
    const std::size_t ell = p.ell();
    if (ell > ell_max) throw std::invalid_argument("state has more change-points than l_max");
    const Index n = p.n();

    auto birth = [&]() -> Proposal {
        const Index free = n - static_cast<Index>(ell) - 2;
        if (free <= 0) return {p, MoveType::Birth};
        const Index np = detail::kth_free_position(rng.uniform_index(static_cast<std::uint64_t>(free)), p.positions());
        return {ChangePoints(n, detail::insert_sorted(p.positions(), np)), MoveType::Birth};
    };
    auto death = [&]() -> Proposal {
        auto positions = p.positions();
        positions.erase(positions.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(ell)));
        return {ChangePoints(n, std::move(positions)), MoveType::Death};
    };

    if (ell == 0) return birth();
    if (ell < ell_max) {
        switch (rng.uniform_index(3)) {
            case 0: return death();
            case 1: return birth();
            default: return propose_fixed(p, rng);
        }
    }
    return rng.uniform_index(2) == 0 ? death() : propose_fixed(p, rng);
}

/// Log of the dimension-matching factor of the unknown-l acceptance ratio:
/// the K_l normalizer ratio times the reverse/forward proposal ratio.
/// Throws on a (l, l') pair no proposal can produce.
inline double log_move_correction(std::size_t ell, std::size_t ell_new, std::size_t ell_max, Index n) {
    const double nd = static_cast<double>(n);
    const double L = static_cast<double>(ell_max);
    auto lg = [](double v) {
        if (!(v > 0.0)) throw std::domain_error("non-positive factor in move correction; n too small for l_max");
        return std::log(v);
    };
    if (ell == 0) {
        if (ell_new != 1) throw std::logic_error("proposal/ratio mismatch: l = 0 must move to l' = 1");
        return lg(2.0 * (nd - 2.0)) - lg((nd - 3.0) * (nd - 4.0));
    }
    if (ell == 1 && ell_new == 0) return lg((nd - 3.0) * (nd - 4.0)) - lg(2.0 * (nd - 2.0));
    if (ell + 1 == ell_max && ell_new == ell_max)
        return lg(3.0 * (2.0 * L + 1.0) * (nd - L - 1.0)) - lg((nd - 2.0 * L - 2.0) * (nd - 2.0 * L - 1.0));
    if (ell == ell_max && ell_new + 1 == ell_max)
        return lg((nd - 2.0 * L - 2.0) * (nd - 2.0 * L - 1.0)) - lg(3.0 * (2.0 * L + 1.0) * (nd - L - 1.0));
    if (ell_new + 1 == ell) {
        const double l = static_cast<double>(ell);
        return lg((nd - 2.0 * l - 2.0) * (nd - 2.0 * l - 1.0)) - lg(2.0 * (2.0 * l + 1.0) * (nd - l - 1.0));
    }
    if (ell_new == ell + 1) {
        const double l = static_cast<double>(ell_new);
        return lg(2.0 * (2.0 * l + 1.0) * (nd - l - 1.0)) - lg((nd - 2.0 * l - 2.0) * (nd - 2.0 * l - 1.0));
    }
    if (ell_new == ell) return 0.0;
    throw std::logic_error("proposal/ratio mismatch: l jumped by more than one");
}

/// log r for a known-l move: evidence ratio times the gap-product ratio.
inline double accept_ratio_fixed(SegmentScorer& scorer, const ChangePoints& p, const ChangePoints& cand) {
    const double gap_new = log_gap_product(cand);
    if (is_log_zero(gap_new)) return kLogZero;
    return scorer.log_joint_evidence(cand) + gap_new - scorer.log_joint_evidence(p) - log_gap_product(p);
}

/// log r for an unknown-l move.
inline double accept_ratio_variable(SegmentScorer& scorer, const ChangePoints& p, const ChangePoints& cand,
                                    std::size_t ell_max) {
    const double correction = log_move_correction(p.ell(), cand.ell(), ell_max, p.n());
    const double gap_new = log_gap_product(cand);
    if (is_log_zero(gap_new)) return kLogZero;
    return scorer.log_joint_evidence(cand) + gap_new - scorer.log_joint_evidence(p) - log_gap_product(p) + correction;
}

/// Metropolis coin: accept with probability min(1, exp(log_r)). The coin is
/// drawn on every call, even when log_r >= 0.
inline bool metropolis_accept(double log_r, Rng& rng) {
    const double u = rng.uniform01();
    return std::log(u) < log_r;
}

struct McmcConfig {
    enum class Mode { Fixed, Variable };

    std::uint64_t iterations = 100'000;
    std::uint64_t burn_in = 10'000;
    std::uint64_t seed = 1;
    std::size_t depth = 10;
    std::optional<double> beta;  // default from the alphabet size
    Mode mode = Mode::Variable;
    std::size_t ell = 1;         // fixed mode
    std::size_t ell_max = 10;    // variable mode
    std::uint64_t thinning = 1;
    std::size_t cache_capacity = EvidenceCache::kDefaultCapacity;
    std::uint64_t max_stored_states = 10'000'000;

    BctParams bct_params(std::size_t m) const {
        return BctParams{m, depth, beta.value_or(BctParams::default_beta(m))};
    }

    /// Largest l the chain can reach.
    std::size_t ell_bound() const { return mode == Mode::Fixed ? ell : ell_max; }

    void validate(Index n) const {
        if (burn_in >= iterations) throw std::invalid_argument("burn-in must be smaller than the iteration count");
        if (thinning == 0) throw std::invalid_argument("thinning must be positive");
        if (mode == Mode::Fixed && ell < 1) throw std::invalid_argument("fixed mode needs l >= 1");
        if (mode == Mode::Variable && ell_max < 2) throw std::invalid_argument("variable mode needs l_max >= 2");
        // Every l up to the bound must leave room for a positive-prior configuration.
        if (n < 2 * static_cast<Index>(ell_bound()) + 3)
            throw std::invalid_argument("series too short for " + std::to_string(ell_bound()) + " change-points");
    }
};

struct MoveStats {
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    double rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

/// Post-burn-in record of one chain. Histograms are always accumulated;
/// individual states are kept unless the run would retain more than
/// max_stored_states, in which case `streaming` is set and `states` is empty.
struct Trace {
    Index n = 0;
    std::size_t ell_bound = 0;
    bool streaming = false;
    std::vector<std::uint64_t> iterations;
    std::vector<ChangePoints> states;

    std::uint64_t retained = 0;
    std::vector<std::uint64_t> ell_hist;
    std::map<Index, std::uint64_t> loc_hist;
    // conditional[l][k] = histogram of the (k+1)-th smallest point among samples with l points
    std::map<std::size_t, std::vector<std::map<Index, std::uint64_t>>> conditional;

    std::map<MoveType, MoveStats> moves;
    std::vector<double> ms_per_1000;

    std::optional<ChangePoints> best_state;
    double best_log_posterior = kLogZero;

    void record(std::uint64_t t, const ChangePoints& p) {
        ++retained;
        ++ell_hist.at(p.ell());
        auto& cond = conditional[p.ell()];
        cond.resize(p.ell());
        for (std::size_t k = 0; k < p.ell(); ++k) {
            ++loc_hist[p.positions()[k]];
            ++cond[k][p.positions()[k]];
        }
        if (!streaming) {
            iterations.push_back(t);
            states.push_back(p);
        }
    }
};

/// Equispaced start: p_k = 1 + round(k (n-1) / (l+1)).
inline ChangePoints equispaced_start(Index n, std::size_t ell) {
    std::vector<Index> pos;
    for (std::size_t k = 1; k <= ell; ++k)
        pos.push_back(1 + static_cast<Index>(std::llround(static_cast<double>(k) * static_cast<double>(n - 1) /
                                                          static_cast<double>(ell + 1))));
    ChangePoints p(n, std::move(pos));
    if (is_log_zero(log_prior_positions(p))) throw std::invalid_argument("series too short for the requested l");
    return p;
}

/// One Metropolis-Hastings chain over change-point configurations.
class ChangePointSampler {
public:
    ChangePointSampler(const Sequence& x, const McmcConfig& config)
        : config_(config),
          scorer_(x, config.bct_params(x.alphabet_size()), config.cache_capacity),
          rng_(config.seed),
          state_(config.mode == McmcConfig::Mode::Fixed ? equispaced_start(static_cast<Index>(x.n()), config.ell)
                                                        : ChangePoints(static_cast<Index>(x.n()), {})) {
        config_.validate(static_cast<Index>(x.n()));
        if (config_.depth != x.context_length()) throw std::invalid_argument("sequence context length differs from D");
    }

    const ChangePoints& state() const { return state_; }
    SegmentScorer& scorer() { return scorer_; }

    /// One propose/accept step. Returns the move kind and whether it was accepted.
    std::pair<MoveType, bool> step() {
        const bool fixed = config_.mode == McmcConfig::Mode::Fixed;
        Proposal prop = fixed ? propose_fixed(state_, rng_) : propose_variable(state_, config_.ell_max, rng_);
        const double log_r = fixed ? accept_ratio_fixed(scorer_, state_, prop.candidate)
                                   : accept_ratio_variable(scorer_, state_, prop.candidate, config_.ell_max);
        const bool accepted = metropolis_accept(log_r, rng_);
        if (accepted) state_ = std::move(prop.candidate);
        return {prop.move, accepted};
    }

    double current_log_posterior() {
        return scorer_.log_posterior_unnorm(
            state_, config_.mode == McmcConfig::Mode::Variable ? std::optional(config_.ell_max) : std::nullopt);
    }

    Trace run() {
        Trace trace;
        trace.n = state_.n();
        trace.ell_bound = config_.ell_bound();
        trace.ell_hist.assign(trace.ell_bound + 1, 0);
        trace.streaming = (config_.iterations - config_.burn_in) / config_.thinning > config_.max_stored_states;

        double lp = current_log_posterior();
        if (is_log_zero(lp)) throw std::runtime_error("initial state has zero posterior mass");
        auto clock = std::chrono::steady_clock::now();
        for (std::uint64_t t = 1; t <= config_.iterations; ++t) {
            const ChangePoints before = state_;
            auto [move, accepted] = step();
            auto& stats = trace.moves[move];
            ++stats.proposed;
            if (accepted) {
                ++stats.accepted;
                if (!(state_ == before)) lp = current_log_posterior();
            }
            if (t > config_.burn_in && (t - config_.burn_in) % config_.thinning == 0) {
                trace.record(t, state_);
                if (lp > trace.best_log_posterior) {
                    trace.best_log_posterior = lp;
                    trace.best_state = state_;
                }
            }
            if (t % 1000 == 0) {
                const auto now = std::chrono::steady_clock::now();
                trace.ms_per_1000.push_back(std::chrono::duration<double, std::milli>(now - clock).count());
                clock = now;
            }
        }
        return trace;
    }

private:
    McmcConfig config_;
    SegmentScorer scorer_;
    Rng rng_;
    ChangePoints state_;
};

inline Trace run(const Sequence& x, const McmcConfig& config) { return ChangePointSampler(x, config).run(); }

/// Independent chains on separate threads; chain c uses seed + c.
inline std::vector<Trace> run_chains(const Sequence& x, const McmcConfig& config, std::size_t chains) {
    if (chains == 0) throw std::invalid_argument("need at least one chain");
    std::vector<Trace> traces(chains);
    std::vector<std::exception_ptr> errors(chains);
    std::vector<std::thread> workers;
    for (std::size_t c = 0; c < chains; ++c) {
        workers.emplace_back([&, c] {
            try {
                McmcConfig cfg = config;
                cfg.seed = config.seed + c;
                traces[c] = run(x, cfg);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return traces;
}

struct Summary {
    std::uint64_t retained = 0;
    std::vector<std::uint64_t> ell_hist;
    std::map<Index, std::uint64_t> loc_hist;
    std::size_t map_ell = 0;
    std::vector<Index> map_positions;
    /// Per-point histograms among samples with l = map_ell.
    std::vector<std::map<Index, std::uint64_t>> map_conditional;
    std::map<std::string, double> acceptance_rates;
    std::optional<ChangePoints> best_state;
    double best_log_posterior = kLogZero;
};

/// Pools one or more traces. l-hat is the mode of the l histogram (ties to
/// the smaller l); p-hat takes, for each rank k, the mode of the k-th
/// smallest point among samples with l = l-hat (ties to the smaller position).
inline Summary summarize(std::span<const Trace> traces) {
    Summary s;
    std::map<MoveType, MoveStats> moves;
    for (const auto& tr : traces) {
        if (s.ell_hist.size() < tr.ell_hist.size()) s.ell_hist.resize(tr.ell_hist.size(), 0);
        for (std::size_t l = 0; l < tr.ell_hist.size(); ++l) s.ell_hist[l] += tr.ell_hist[l];
        for (auto [pos, c] : tr.loc_hist) s.loc_hist[pos] += c;
        s.retained += tr.retained;
        for (auto [m, st] : tr.moves) {
            moves[m].proposed += st.proposed;
            moves[m].accepted += st.accepted;
        }
        if (tr.best_state && tr.best_log_posterior > s.best_log_posterior) {
            s.best_log_posterior = tr.best_log_posterior;
            s.best_state = tr.best_state;
        }
    }
    if (s.retained == 0) throw std::invalid_argument("cannot summarize an empty trace");

    for (std::size_t l = 0; l < s.ell_hist.size(); ++l)
        if (s.ell_hist[l] > s.ell_hist[s.map_ell]) s.map_ell = l;

    s.map_conditional.assign(s.map_ell, {});
    for (const auto& tr : traces) {
        auto it = tr.conditional.find(s.map_ell);
        if (it == tr.conditional.end()) continue;
        for (std::size_t k = 0; k < it->second.size(); ++k)
            for (auto [pos, c] : it->second[k]) s.map_conditional[k][pos] += c;
    }
    for (const auto& h : s.map_conditional) {
        Index best = 0;
        std::uint64_t best_count = 0;
        for (auto [pos, c] : h)
            if (c > best_count) {
                best = pos;
                best_count = c;
            }
        s.map_positions.push_back(best);
    }
    for (auto [m, st] : moves) s.acceptance_rates[move_name(m)] = st.rate();
    return s;
}

inline Summary summarize(const Trace& trace) { return summarize(std::span<const Trace>(&trace, 1)); }

}  // namespace bctseg
