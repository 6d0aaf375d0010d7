#include "coverage/classifier.hpp"
#include "coverage/harness.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace coverage;
using namespace coverage::testing;

namespace {

Group female(const ItemCollection& c) { return make_group(c.schema(), parse_pattern(c.schema(), "female")); }

// Counts point queries per item to check that nobody is labeled twice.
class PointAudit : public SimulatedCrowd {
public:
    using SimulatedCrowd::SimulatedCrowd;
    std::map<std::size_t, int> point_queries;

protected:
    PointOutcome resolve_point(const QueryTask& t) override {
        ++point_queries[t.items.front()];
        return SimulatedCrowd::resolve_point(t);
    }
};

std::vector<std::size_t> iota_vec(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

} // namespace

TEST(Probe, TenPercentRoundedUp) {
    auto c = generate_binary(1000, 500, 1);
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto G = iota_vec(403);
    auto r = probe_precision(G, 0.1, female(c), crowd, 3);
    EXPECT_EQ(r.tasks_issued, 41u);
    EXPECT_EQ(r.labels.size(), 41u);
    auto one = probe_precision(std::vector<std::size_t>{7}, 0.1, female(c), crowd, 3);
    EXPECT_EQ(one.tasks_issued, 1u);
    EXPECT_THROW(probe_precision(std::vector<std::size_t>{}, 0.1, female(c), crowd, 3), std::invalid_argument);
}

TEST(Probe, PurePredictionsHavePrecisionOne) {
    auto c = generate_binary(300, 100, 2);
    auto pc = plant_predictions(c, female(c), 100, 100, 1);
    auto ps = make_predictions(pc, female(pc));
    SimulatedCrowd crowd(pc, CrowdConfig{0.0, 1, 0});
    EXPECT_DOUBLE_EQ(probe_precision(ps.predicted, 0.1, female(pc), crowd, 0).precision, 1.0);
}

TEST(Probe, EstimateConcentratesAroundPlantedPrecision) {
    auto c = generate_binary(3000, 1000, 3);
    auto pc = plant_predictions(c, female(c), 1000, 600, 4);
    auto ps = make_predictions(pc, female(pc));
    int close = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SimulatedCrowd crowd(pc, CrowdConfig{0.0, 1, seed});
        const double est = probe_precision(ps.predicted, 0.1, female(pc), crowd, seed).precision;
        close += std::abs(est - 0.6) <= 0.15 ? 1 : 0;
    }
    EXPECT_GE(close, 95);
}

TEST(Partition, PureSetIsOneTask) {
    auto c = generate_binary(50, 50, 1);
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto r = partition_verify(iota_vec(50), 50, female(c), crowd);
    EXPECT_EQ(r.tasks_issued, 1u);
    EXPECT_EQ(r.verified.size(), 50u);
    EXPECT_TRUE(r.rejected.empty());
}

TEST(Partition, TwoItemTrace) {
    auto c = generate(binary_schema(), 2, {{Labels{0}, 1}, {Labels{1}, 1}}, 0);
    const std::size_t member = c.truth(0)[0] == 0 ? 0 : 1;
    std::vector<std::size_t> G{member, 1 - member};
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto r = partition_verify(G, 2, female(c), crowd);
    EXPECT_EQ(r.tasks_issued, 2u);
    ASSERT_EQ(r.trace.size(), 3u);
    EXPECT_TRUE(r.trace[0].answer);
    EXPECT_FALSE(r.trace[1].answer);
    EXPECT_TRUE(r.trace[2].inferred);
    EXPECT_EQ(r.verified, std::vector<std::size_t>{member});
    EXPECT_EQ(r.rejected, std::vector<std::size_t>{1 - member});
}

// Every layout of G up to 10 items, every n: exactly the members survive.
TEST(Partition, ExhaustiveSmallLayouts) {
    for (std::size_t m = 1; m <= 10; ++m) {
        for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
            std::string layout;
            for (std::size_t i = 0; i < m; ++i) layout += (mask >> i & 1) ? 't' : 's';
            auto c = shapes(layout);
            for (std::size_t n : {std::size_t{1}, std::size_t{3}, m}) {
                SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
                auto r = partition_verify(iota_vec(m), n, triangle(), crowd);
                std::vector<std::size_t> expected;
                for (std::size_t i = 0; i < m; ++i)
                    if (layout[i] == 't') expected.push_back(i);
                ASSERT_EQ(r.verified, expected) << layout << " n=" << n;
                EXPECT_EQ(r.verified.size() + r.rejected.size(), m);
            }
        }
    }
}

TEST(Label, StopsAtTau) {
    auto c = shapes("tttttsss");
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto r = label_verify(iota_vec(8), 3, triangle(), crowd);
    EXPECT_EQ(r.tasks_issued, 3u);
    EXPECT_EQ(r.verified.size(), 3u);
}

TEST(Label, ReusesProbeLabels) {
    auto c = shapes("tttttsss");
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto r = label_verify(iota_vec(8), 3, triangle(), crowd, {{1, true}, {6, false}});
    EXPECT_EQ(r.tasks_issued, 2u);
    EXPECT_EQ(r.verified, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Label, NoPositivesLabelsEverything) {
    auto c = shapes("ssssss");
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto r = label_verify(iota_vec(6), 3, triangle(), crowd);
    EXPECT_EQ(r.tasks_issued, 6u);
    EXPECT_TRUE(r.verified.empty());
}

TEST(ClassifierCoverage, BranchFollowsProbe) {
    auto c = generate_binary(3000, 200, 9);
    for (auto [tp, expected] : {std::pair{99u, Strategy::Partition}, std::pair{8u, Strategy::Label}}) {
        auto pc = plant_predictions(c, female(c), 100, tp, 2);
        SimulatedCrowd crowd(pc, CrowdConfig{0.0, 1, 0});
        auto r = classifier_coverage(pc, 50, 50, female(pc), crowd);
        ASSERT_TRUE(r.strategy);
        EXPECT_EQ(*r.strategy, expected);
        EXPECT_TRUE(r.verdict.covered);
        EXPECT_EQ(r.total_tasks(), crowd.counters().tasks_issued);
    }
}

TEST(ClassifierCoverage, PerfectClassifierUncoveredIsExact) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto c = generate_binary(2000, 30, seed);
        auto pc = plant_predictions(c, female(c), 30, 30, seed);
        SimulatedCrowd crowd(pc, CrowdConfig{0.0, 1, 0});
        auto r = classifier_coverage(pc, 50, 50, female(pc), crowd);
        EXPECT_FALSE(r.verdict.covered);
        EXPECT_EQ(r.verdict.cnt, 30u);
        EXPECT_GT(r.sweep_tasks, 0u);
    }
}

TEST(ClassifierCoverage, EmptyPredictionsSweepEverything) {
    auto c = generate_binary(500, 60, 1);
    auto pc = plant_predictions(c, female(c), 0, 0, 1);
    SimulatedCrowd crowd(pc, CrowdConfig{0.0, 1, 0});
    auto r = classifier_coverage(pc, 50, 50, female(pc), crowd);
    EXPECT_FALSE(r.strategy.has_value());
    EXPECT_TRUE(r.verdict.covered);
    EXPECT_EQ(r.probe_tasks, 0u);
}

TEST(ClassifierCoverage, CorrectAcrossPrecisionsAndCounts) {
    std::mt19937_64 rng(31);
    const double precisions[] = {0.05, 0.25, 0.5, 0.75, 0.99};
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t tau = 20 + rng() % 40;
        const std::size_t f = tau - 10 + rng() % 21;
        const std::size_t N = 1500 + rng() % 1500;
        const double prec = precisions[trial % 5];
        auto c = generate_binary(N, f, rng());
        const std::size_t predicted = 20 + rng() % 120;
        const auto tp = std::min<std::size_t>(f, static_cast<std::size_t>(std::llround(prec * predicted)));
        auto pc = plant_predictions(c, female(c), predicted, tp, rng());
        PointAudit crowd(pc, CrowdConfig{0.0, 1, 0});
        ClassifierOptions opts;
        opts.seed = rng();
        auto r = classifier_coverage(pc, 1 + rng() % 64, tau, female(pc), crowd, opts);
        ASSERT_EQ(r.verdict.covered, f >= tau) << "trial " << trial;
        if (!r.verdict.covered) {
            EXPECT_EQ(r.verdict.cnt, f);
        }
        for (const auto& [item, times] : crowd.point_queries) ASSERT_EQ(times, 1) << "item " << item;
    }
}

TEST(ClassifierCoverage, BranchIsAFunctionOfTheProbe) {
    ProbeResult p;
    p.precision = 0.75;
    EXPECT_EQ(choose_strategy(p), Strategy::Label);
    p.precision = 0.76;
    EXPECT_EQ(choose_strategy(p), Strategy::Partition);
    p.precision = 0.0;
    EXPECT_EQ(choose_strategy(p), Strategy::Label);
}
