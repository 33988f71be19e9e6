#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "bctseg/simulator.hpp"

using namespace bctseg;

namespace {

TreeModel binary_d1(double a, double b) {
    return TreeModel(2, {{0}, {1}}, {{{0}, {1 - a, a}}, {{1}, {b, 1 - b}}});
}

std::vector<double> empirical_marginal(const TreeModel& model, std::size_t n, std::uint64_t seed) {
    const std::size_t m = model.alphabet_size();
    PiecewiseSpec spec{Alphabet::numeric(m), model.depth(), {{model, n}}, {}, seed};
    auto g = generate_piecewise(spec);
    std::vector<double> freq(m, 0.0);
    for (Symbol s : g.sequence.observations()) freq[s] += 1.0 / static_cast<double>(n);
    return freq;
}

}  // namespace

TEST(Sampler, RootOnlyTreeDrawsFromRootParameters) {
    auto model = TreeModel::root_only(3, std::vector<double>{0.4, 0.2, 0.4});
    auto freq = empirical_marginal(model, 100'000, 1);
    EXPECT_NEAR(freq[0], 0.4, 0.02);
    EXPECT_NEAR(freq[1], 0.2, 0.02);
    EXPECT_NEAR(freq[2], 0.4, 0.02);
}

TEST(Sampler, ContextWalksMostRecentSymbolFirst) {
    // Leaves 0, 10, 11 (most recent first). History ...0 1 1 ends in 1,1.
    TreeModel model(2, {{0}, {1, 0}, {1, 1}}, {{{0}, {1, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {0, 1}}});
    Rng rng(2);
    std::vector<Symbol> history{0, 1, 1};
    for (int k = 0; k < 100; ++k) EXPECT_EQ(sample_next(model, history, rng), 1);
    history = {1, 0, 1};  // most recent 1 then 0: leaf "10"
    for (int k = 0; k < 100; ++k) EXPECT_EQ(sample_next(model, history, rng), 0);
}

TEST(Sampler, DepthOneLeafUsesItsParameters) {
    auto spec = synthetic_benchmark_spec();
    const auto& m3 = spec.segments[2].model;
    ContextSampler sampler(m3);
    std::vector<Symbol> history{0, 1, 2};
    EXPECT_EQ(sampler.leaf_cdf(history, 3).size(), 3u);
    const auto& cdf = sampler.leaf_cdf(history, 3);
    EXPECT_NEAR(cdf[0], 0.3, 1e-15);
    EXPECT_NEAR(cdf[1] - cdf[0], 0.2, 1e-15);
    EXPECT_NEAR(cdf[2] - cdf[1], 0.5, 1e-15);
}

TEST(Sampler, ShortHistoryIsAnError) {
    TreeModel model(2, {{0}, {1}}, {{{0}, {0.5, 0.5}}, {{1}, {0.5, 0.5}}});
    Rng rng(3);
    EXPECT_THROW(sample_next(model, std::vector<Symbol>{}, rng), std::invalid_argument);
}

TEST(Generator, SyntheticBenchmarkLayout) {
    auto spec = synthetic_benchmark_spec();
    EXPECT_EQ(spec.total_length(), 4300u);
    EXPECT_EQ(spec.change_points(), (std::vector<Index>{2500, 3500, 4000}));
    auto g = generate_piecewise(spec);
    EXPECT_EQ(g.sequence.n(), 4300u);
    EXPECT_EQ(g.sequence.context_length(), 10u);
    EXPECT_EQ(g.change_points, (std::vector<Index>{2500, 3500, 4000}));
    for (Symbol s : g.sequence.context()) EXPECT_EQ(s, 0);
}

TEST(Generator, SameSeedSameSeries) {
    auto a = generate_piecewise(synthetic_benchmark_spec(7));
    auto b = generate_piecewise(synthetic_benchmark_spec(7));
    auto c = generate_piecewise(synthetic_benchmark_spec(8));
    EXPECT_TRUE(std::ranges::equal(a.sequence.full(), b.sequence.full()));
    EXPECT_FALSE(std::ranges::equal(a.sequence.full(), c.sequence.full()));
}

TEST(Generator, PerLeafFrequenciesPassChiSquare) {
    // Segment 1 of the benchmark, long run: every leaf's next-symbol counts
    // against its theta. Critical value of chi^2 with 2 dof at 0.999 is 13.8.
    auto spec = synthetic_benchmark_spec(11);
    const auto model = spec.segments[0].model;
    spec.segments = {{model, 200'000}};
    auto g = generate_piecewise(spec);
    const auto full = g.sequence.full();
    std::map<std::size_t, std::vector<double>> counts;
    for (std::size_t i = spec.depth; i < full.size(); ++i) {
        Context ctx(full.begin() + static_cast<std::ptrdiff_t>(i - spec.depth), full.begin() + static_cast<std::ptrdiff_t>(i));
        std::reverse(ctx.begin(), ctx.end());
        auto leaf = model.find_leaf(ctx);
        ASSERT_TRUE(leaf);
        auto& c = counts[*leaf];
        c.resize(3, 0.0);
        c[full[i]] += 1.0;
    }
    EXPECT_EQ(counts.size(), model.num_leaves());
    for (const auto& [leaf, c] : counts) {
        const auto& theta = model.theta(model.leaves()[leaf]);
        const double total = c[0] + c[1] + c[2];
        double chi2 = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double e = total * theta[j];
            chi2 += (c[j] - e) * (c[j] - e) / e;
        }
        EXPECT_LT(chi2, 13.8) << "leaf " << leaf;
    }
}

TEST(Generator, SpecValidation) {
    auto spec = synthetic_benchmark_spec();
    spec.depth = 2;  // segment 1 has depth 4
    EXPECT_THROW(generate_piecewise(spec), std::invalid_argument);
    spec = synthetic_benchmark_spec();
    spec.initial_context = {0, 1};
    EXPECT_THROW(generate_piecewise(spec), std::invalid_argument);
    spec = synthetic_benchmark_spec();
    spec.segments[1].length = 0;
    EXPECT_THROW(generate_piecewise(spec), std::invalid_argument);
}

TEST(Stationary, RootOnlyIsTheta) {
    auto pi = stationary_marginal(TreeModel::root_only(3, std::vector<double>{0.4, 0.2, 0.4}));
    EXPECT_EQ(pi, (std::vector<double>{0.4, 0.2, 0.4}));
}

TEST(Stationary, TwoStateClosedForm) {
    // P(0 -> 1) = 0.1, P(1 -> 0) = 0.5: pi_1 = 0.1 / 0.6 = 1/6.
    auto pi = stationary_marginal(binary_d1(0.1, 0.5));
    EXPECT_NEAR(pi[1], 1.0 / 6.0, 1e-9);
    EXPECT_NEAR(pi[0], 5.0 / 6.0, 1e-9);
}

TEST(Stationary, SumsToOneAndMatchesSimulation) {
    auto spec = synthetic_benchmark_spec();
    for (std::size_t k = 0; k < spec.segments.size(); ++k) {
        const auto& model = spec.segments[k].model;
        auto pi = stationary_marginal(model);
        double total = 0.0;
        for (double v : pi) total += v;
        EXPECT_NEAR(total, 1.0, 1e-12);
        auto freq = empirical_marginal(model, 400'000, 20 + k);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(pi[j], freq[j], 0.006) << "model " << k + 1 << " symbol " << j;
    }
}

TEST(Stationary, FixedPointOfMarginalRecursion) {
    // For a depth-1 chain the symbol marginal itself is a fixed point of the kernel.
    TreeModel model(3, {{0}, {1}, {2}}, {{{0}, {0.5, 0.3, 0.2}}, {{1}, {0.3, 0.6, 0.1}}, {{2}, {0.3, 0.2, 0.5}}});
    auto pi = stationary_marginal(model);
    const std::vector<std::vector<double>> rows{model.theta({0}), model.theta({1}), model.theta({2})};
    double worst = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        double next = 0.0;
        for (std::size_t s = 0; s < 3; ++s) next += pi[s] * rows[s][j];
        worst = std::max(worst, std::abs(next - pi[j]));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(Stationary, LargeStateSpaceUsesIteration) {
    // Depth 7 binary: 128 states direct; depth 11: 2048 states iterative. Same chain.
    auto deep = [](std::size_t d) {
        std::vector<Context> leaves;
        std::map<Context, std::vector<double>> params;
        Context all_zero(d, 0);
        for (std::size_t k = 0; k < d; ++k) {
            Context c(k, 0);
            c.push_back(1);
            leaves.push_back(c);
            params[c] = {0.3, 0.7};
        }
        leaves.push_back(all_zero);
        params[all_zero] = {0.9, 0.1};
        return TreeModel(2, leaves, params);
    };
    auto a = stationary_marginal(deep(7));
    auto b = stationary_marginal(deep(11));
    for (auto* pi : {&a, &b}) EXPECT_NEAR((*pi)[0] + (*pi)[1], 1.0, 1e-12);
    auto fa = empirical_marginal(deep(7), 300'000, 5);
    auto fb = empirical_marginal(deep(11), 300'000, 6);
    EXPECT_NEAR(a[1], fa[1], 0.006);
    EXPECT_NEAR(b[1], fb[1], 0.006);
}

TEST(Stationary, ReducibleChainIsAnError) {
    // Both states absorbing: two closed classes.
    EXPECT_THROW(stationary_marginal(binary_d1(0.0, 0.0)), std::runtime_error);
}
