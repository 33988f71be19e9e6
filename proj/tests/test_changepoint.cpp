#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bctseg/brute_force.hpp"
#include "bctseg/changepoint.hpp"

using namespace bctseg;

namespace {

Sequence random_binary(std::mt19937& gen, std::size_t depth, std::size_t n) {
    std::vector<Symbol> ctx(depth), obs(n);
    for (auto& s : ctx) s = gen() % 2;
    for (auto& s : obs) s = gen() % 2;
    return Sequence(Alphabet::numeric(2), ctx, obs);
}

/// All increasing tuples of `ell` points from {2..n-1}.
std::vector<ChangePoints> all_configurations(Index n, std::size_t ell) {
    std::vector<ChangePoints> out;
    std::vector<Index> cur;
    auto rec = [&](auto&& self, Index from) -> void {
        if (cur.size() == ell) {
            out.emplace_back(n, cur);
            return;
        }
        for (Index p = from; p <= n - 1; ++p) {
            cur.push_back(p);
            self(self, p + 1);
            cur.pop_back();
        }
    };
    rec(rec, 2);
    return out;
}

}  // namespace

TEST(ChangePoints, Validation) {
    EXPECT_THROW(ChangePoints(10, {1}), std::invalid_argument);
    EXPECT_THROW(ChangePoints(10, {10}), std::invalid_argument);
    EXPECT_THROW(ChangePoints(10, {5, 5}), std::invalid_argument);
    EXPECT_THROW(ChangePoints(10, {6, 5}), std::invalid_argument);
    EXPECT_NO_THROW(ChangePoints(10, {4, 5}));  // adjacent: representable, zero prior
    ChangePoints p(10, {4, 7});
    EXPECT_EQ(p.at(0), 1);
    EXPECT_EQ(p.at(3), 10);
}

TEST(Partition, SegmentBoundaries) {
    std::vector<Symbol> ctx{0, 1}, obs(10);
    for (std::size_t i = 0; i < 10; ++i) obs[i] = static_cast<Symbol>(i % 2);
    Sequence x(Alphabet::numeric(2), ctx, obs);
    auto segs = partition(x, ChangePoints(10, {4, 7}));
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_EQ(segs[0].first, 1);
    EXPECT_EQ(segs[0].last, 3);
    EXPECT_EQ(segs[1].first, 4);
    EXPECT_EQ(segs[1].last, 6);
    EXPECT_EQ(segs[2].first, 7);
    EXPECT_EQ(segs[2].last, 10);
    // Segment 2's context is x_2, x_3; segment 1's is the global context.
    EXPECT_EQ(segs[0].context.data(), x.context().data());
    EXPECT_EQ(segs[1].context[0], x.at(2));
    EXPECT_EQ(segs[1].context[1], x.at(3));
    EXPECT_EQ(segs[1].observations[0], x.at(4));
}

TEST(Partition, NoChangePointsIsWholeSeries) {
    std::mt19937 gen(1);
    auto x = random_binary(gen, 3, 15);
    auto segs = partition(x, ChangePoints(15, {}));
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_EQ(segs[0].first, 1);
    EXPECT_EQ(segs[0].last, 15);
}

TEST(Partition, CoversSeriesOnRandomConfigurations) {
    std::mt19937 gen(2);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 5 + gen() % 60;
        auto x = random_binary(gen, gen() % 4, static_cast<std::size_t>(n));
        std::vector<Index> pos;
        for (Index p = 2; p <= n - 1; ++p)
            if (gen() % 5 == 0) pos.push_back(p);
        auto segs = partition(x, ChangePoints(n, pos));
        Index expect_first = 1, total = 0;
        for (const auto& s : segs) {
            EXPECT_EQ(s.first, expect_first);
            EXPECT_GE(s.length(), 1);
            EXPECT_EQ(static_cast<Index>(s.observations.size()), s.length());
            expect_first = s.last + 1;
            total += s.length();
        }
        EXPECT_EQ(total, n);
        EXPECT_EQ(segs.back().last, n);
    }
}

TEST(PositionPrior, SingleValidPointForNFive) {
    EXPECT_NEAR(log_prior_positions(ChangePoints(5, {3})), 0.0, 1e-15);
    EXPECT_EQ(log_prior_positions(ChangePoints(5, {2})), kLogZero);
    EXPECT_EQ(log_prior_positions(ChangePoints(5, {4})), kLogZero);
}

TEST(PositionPrior, AdjacentPointsHaveZeroMass) {
    EXPECT_EQ(log_prior_positions(ChangePoints(20, {5, 6})), kLogZero);
    EXPECT_EQ(log_prior_positions(ChangePoints(20, {5, 9, 10})), kLogZero);
}

TEST(PositionPrior, EmptyConfigurationHasMassOne) {
    EXPECT_NEAR(log_prior_positions(ChangePoints(50, {})), 0.0, 1e-12);
}

TEST(PositionPrior, NormalizesByEnumeration) {
    for (auto [n, ell] : {std::pair<Index, std::size_t>{12, 2}, {15, 3}, {9, 1}, {20, 2}}) {
        double total = 0.0;
        for (const auto& p : all_configurations(n, ell)) total += std::exp(log_prior_positions(p));
        EXPECT_NEAR(total, 1.0, 1e-12) << "n=" << n << " l=" << ell;
    }
}

TEST(CountPrior, Uniform) {
    EXPECT_NEAR(log_prior_count(4, 10), std::log(1.0 / 11.0), 1e-15);
    EXPECT_EQ(log_prior_count(0, 0), 0.0);
    EXPECT_THROW(log_prior_count(3, 2), std::invalid_argument);
}

TEST(JointEvidence, NoChangePointIsWholeSeriesEvidence) {
    std::mt19937 gen(3);
    auto x = random_binary(gen, 2, 40);
    const auto params = BctParams::with_default_beta(2, 2);
    SegmentScorer scorer(x, params);
    EXPECT_DOUBLE_EQ(log_joint_evidence(x, ChangePoints(40, {}), scorer), ctw_log_evidence(x, params));
}

TEST(JointEvidence, SumOfIndependentSegmentEvidences) {
    std::mt19937 gen(4);
    auto x = random_binary(gen, 2, 30);
    const auto params = BctParams::with_default_beta(2, 2);
    SegmentScorer scorer(x, params);
    for (Index p = 2; p <= 29; ++p) {
        // Oracle: enumeration over trees on each stretch with its own preceding context.
        const double oracle = brute_force_evidence(x.full(), 2, 2 + static_cast<std::size_t>(p) - 1, params) +
                              brute_force_evidence(x.full(), 2 + static_cast<std::size_t>(p) - 1, x.full().size(), params);
        EXPECT_NEAR(scorer.log_joint_evidence(ChangePoints(30, {p})), oracle, 1e-10);
    }
}

TEST(JointEvidence, SegmentContextReachesIntoPreviousSegment) {
    // Same observations, different preceding symbol: the second segment's evidence must change.
    Sequence a(Alphabet::numeric(2), {0}, {0, 0, 0, 1, 1, 0, 1, 1});
    Sequence b(Alphabet::numeric(2), {0}, {0, 0, 1, 1, 1, 0, 1, 1});
    const auto params = BctParams::with_default_beta(2, 1);
    SegmentScorer sa(a, params), sb(b, params);
    EXPECT_NE(sa.segment_log_evidence(4, 8), sb.segment_log_evidence(4, 8));
    EXPECT_NEAR(sa.segment_log_evidence(4, 8), brute_force_evidence(a.full(), 4, 9, params), 1e-12);
}

TEST(EvidenceCache, LruEviction) {
    EvidenceCache cache(2);
    cache.put(1, 5, -1.0);
    cache.put(6, 9, -2.0);
    EXPECT_EQ(cache.get(1, 5), -1.0);  // refreshes (1,5)
    cache.put(10, 12, -3.0);           // evicts (6,9)
    EXPECT_FALSE(cache.get(6, 9).has_value());
    EXPECT_EQ(cache.get(10, 12), -3.0);
    EXPECT_EQ(cache.get(1, 5), -1.0);
    EXPECT_EQ(cache.size(), 2u);
    EXPECT_EQ(cache.hits(), 3u);
    EXPECT_EQ(cache.misses(), 1u);
}

TEST(EvidenceCache, TransparentUnderRandomProposals) {
    std::mt19937 gen(5);
    auto x = random_binary(gen, 3, 200);
    const auto params = BctParams::with_default_beta(2, 3);
    SegmentScorer cached(x, params, 64), uncached(x, params, 0);
    for (int step = 0; step < 500; ++step) {
        std::vector<Index> pos;
        for (Index p = 2; p <= 199; ++p)
            if (gen() % 40 == 0) pos.push_back(p);
        ChangePoints p(200, pos);
        EXPECT_EQ(cached.log_posterior_unnorm(p), uncached.log_posterior_unnorm(p));
    }
    EXPECT_GT(cached.cache().hits(), 0u);
    EXPECT_EQ(uncached.cache().size(), 0u);
    // Spot check: cached entries equal a fresh recomputation.
    for (Index first : {1, 50, 120})
        EXPECT_EQ(cached.segment_log_evidence(first, 199), cached.compute(first, 199));
}

TEST(Posterior, ZeroPriorPropagates) {
    std::mt19937 gen(6);
    auto x = random_binary(gen, 1, 20);
    SegmentScorer s(x, BctParams::with_default_beta(2, 1));
    EXPECT_EQ(s.log_posterior_unnorm(ChangePoints(20, {7, 8})), kLogZero);
}

TEST(Posterior, EnumerationNormalizes) {
    std::mt19937 gen(7);
    auto x = random_binary(gen, 1, 20);
    SegmentScorer s(x, BctParams::with_default_beta(2, 1));
    std::vector<double> logs;
    for (std::size_t ell = 0; ell <= 2; ++ell)
        for (const auto& p : all_configurations(20, ell)) logs.push_back(s.log_posterior_unnorm(p, 2));
    const double norm = log_sum_exp(logs);
    double total = 0.0;
    for (double v : logs) total += std::exp(v - norm);
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ExactPosterior, SumsToOneAndMatchesUnnormalizedPosterior) {
    std::mt19937 gen(8);
    auto x = random_binary(gen, 1, 20);
    const auto params = BctParams::with_default_beta(2, 1);
    auto post = exact_single_cp_posterior(x, params);
    ASSERT_EQ(post.size(), 18u);
    double total = 0.0;
    for (double v : post) total += v;
    EXPECT_NEAR(total, 1.0, 1e-10);
    EXPECT_EQ(post.front(), 0.0);  // p = 2: zero prior
    EXPECT_EQ(post.back(), 0.0);   // p = n-1
    SegmentScorer s(x, params);
    std::vector<double> logs;
    for (Index p = 2; p <= 19; ++p) logs.push_back(s.log_posterior_unnorm(ChangePoints(20, {p})));
    const double norm = log_sum_exp(logs);
    for (std::size_t k = 0; k < logs.size(); ++k) EXPECT_NEAR(post[k], std::exp(logs[k] - norm), 1e-10);
}

TEST(ExactPosterior, FindsHardSwitch) {
    // Bernoulli(0.05) for x_1..x_9, Bernoulli(0.95) from x_10 on.
    std::mt19937 gen(9);
    std::bernoulli_distribution lo(0.05), hi(0.95);
    std::vector<Symbol> obs(20);
    for (std::size_t i = 0; i < 20; ++i) obs[i] = (i < 9 ? lo(gen) : hi(gen)) ? 1 : 0;
    Sequence x(Alphabet::numeric(2), {0}, obs);
    const auto params = BctParams::with_default_beta(2, 1);
    auto post = exact_single_cp_posterior(x, params);

    // Oracle: tree enumeration on both sides of every split.
    std::vector<double> logs;
    for (Index p = 2; p <= 19; ++p) {
        const std::size_t cut = static_cast<std::size_t>(p);  // full index of x_p is 1 + p - 1
        const double prior = log_prior_positions(ChangePoints(20, {p}));
        logs.push_back(is_log_zero(prior) ? kLogZero
                                          : brute_force_evidence(x.full(), 1, cut, params) +
                                                brute_force_evidence(x.full(), cut, 21, params) + prior);
    }
    const double norm = log_sum_exp(logs);
    for (std::size_t k = 0; k < logs.size(); ++k) EXPECT_NEAR(post[k], std::exp(logs[k] - norm), 1e-10);
    const auto argmax = static_cast<Index>(std::max_element(post.begin(), post.end()) - post.begin()) + 2;
    EXPECT_LE(std::abs(argmax - 10), 3);
}

TEST(ExactPosterior, RejectsTinySeries) {
    Sequence x(Alphabet::numeric(2), {}, {0, 1, 0});
    EXPECT_THROW(exact_single_cp_posterior(x, BctParams::with_default_beta(2, 0)), std::invalid_argument);
}
