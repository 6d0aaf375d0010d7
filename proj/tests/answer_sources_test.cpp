#include "coverage/answer_source.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace coverage;
using namespace coverage::testing;

namespace {

std::vector<std::size_t> range(std::size_t b, std::size_t e) {
    std::vector<std::size_t> out;
    for (auto i = b; i < e; ++i) out.push_back(i);
    return out;
}

CrowdConfig exact(unsigned k = 3) { return CrowdConfig{0.0, k, 1}; }

} // namespace

TEST(SimulatedCrowd, RunningExampleSetAnswers) {
    auto c = shapes(kRunningExample);
    SimulatedCrowd crowd(c, exact());
    // items 4..5 are (triangle, square); 0..3 are four squares
    EXPECT_TRUE(crowd.ask_set(crowd.make_set_task(range(4, 6), target_of(triangle()))));
    EXPECT_FALSE(crowd.ask_set(crowd.make_set_task(range(0, 4), target_of(triangle()))));
    EXPECT_EQ(crowd.counters().tasks_issued, 2u);
    EXPECT_EQ(crowd.counters().assignments_issued, 6u);
}

TEST(SimulatedCrowd, ReverseQuestionOnPureSet) {
    auto c = shapes("tttt");
    SimulatedCrowd crowd(c, exact());
    EXPECT_FALSE(crowd.ask_set(crowd.make_set_task(range(0, 4), target_of(triangle(), /*negated=*/true))));
    auto mixed = shapes("ttst");
    SimulatedCrowd crowd2(mixed, exact());
    EXPECT_TRUE(crowd2.ask_set(crowd2.make_set_task(range(0, 4), target_of(triangle(), true))));
}

TEST(SimulatedCrowd, PointQueries) {
    AttributeSchema s({{"gender", {"F", "M"}}, {"race", {"White", "Black"}}});
    ItemCollection c(s, {Item{"a", "", Labels{0, 1}, {}}});
    SimulatedCrowd exact_crowd(c, exact());
    EXPECT_EQ(exact_crowd.ask_point(exact_crowd.make_point_task(0, {0}))[0], 0);

    SimulatedCrowd liar(c, CrowdConfig{1.0, 3, 9});
    auto l = liar.ask_point(liar.make_point_task(0, {1}));
    EXPECT_EQ(l[1], 0);  // Black forced to White
    EXPECT_EQ(l[0], kUnspecified);
}

TEST(SimulatedCrowd, AskingTwiceIsAnError) {
    auto c = shapes("st");
    SimulatedCrowd crowd(c, exact());
    auto t = crowd.make_set_task(range(0, 2), target_of(triangle()));
    crowd.ask_set(t);
    EXPECT_THROW(crowd.ask_set(t), AnswerSourceError);
    EXPECT_EQ(crowd.counters().tasks_issued, 1u);
}

TEST(SimulatedCrowd, UnknownItemIsAnError) {
    auto c = shapes("st");
    SimulatedCrowd crowd(c, exact());
    EXPECT_THROW(crowd.ask_set(crowd.make_set_task({5}, target_of(triangle()))), AnswerSourceError);
}

TEST(SimulatedCrowd, ConfigValidation) {
    auto c = shapes("st");
    EXPECT_THROW(SimulatedCrowd(c, CrowdConfig{0.1, 2, 0}), ConfigError);
    EXPECT_THROW(SimulatedCrowd(c, CrowdConfig{1.5, 3, 0}), ConfigError);
}

// Closed form for k=3: 3p^2(1-p) + p^3.
TEST(SimulatedCrowd, MajorityErrorMatchesClosedForm) {
    const double p = 0.3;
    const double expected = 3 * p * p * (1 - p) + p * p * p;  // 0.216
    auto c = shapes("t");
    SimulatedCrowd crowd(c, CrowdConfig{p, 3, 2024});
    std::size_t wrong = 0;
    const std::size_t trials = 10000;
    for (std::size_t i = 0; i < trials; ++i)
        if (crowd.ask_point(crowd.make_point_task(0, {0}))[0] != 1) ++wrong;
    EXPECT_NEAR(static_cast<double>(wrong) / trials, expected, 0.02);
    EXPECT_NEAR(expected, 0.216, 1e-12);
}

TEST(SimulatedCrowd, ErrorRateMonotoneInP) {
    auto c = shapes("tsst");
    double prev = -1.0;
    for (int step = 0; step <= 10; ++step) {
        const double p = 0.05 * step;
        SimulatedCrowd crowd(c, CrowdConfig{p, 3, 77});
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < 2000; ++i) {
            auto t = crowd.make_set_task({i % 4}, target_of(triangle()));
            if (crowd.ask_set(t) != crowd.truth_answer(t)) ++wrong;
        }
        const double rate = wrong / 2000.0;
        EXPECT_GE(rate, prev);
        prev = rate;
    }
}

TEST(SimulatedCrowd, ExactCrowdAgreesWithTruthOnRandomSets) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto c = random_binary(60, rng() % 6, rng);
        SimulatedCrowd crowd(c, exact(1));
        std::vector<std::size_t> set;
        for (std::size_t i = 0; i < c.size(); ++i)
            if (rng() % 3 == 0) set.push_back(i);
        const bool expected = true_count(c, set, triangle().pattern) >= 1;
        EXPECT_EQ(crowd.ask_set(crowd.make_set_task(set, target_of(triangle()))), expected);
    }
}

TEST(SimulatedCrowd, DeterministicForSeedAndSequence) {
    auto c = shapes("tststststs");
    auto run = [&] {
        SimulatedCrowd crowd(c, CrowdConfig{0.4, 3, 11});
        std::vector<bool> out;
        for (std::size_t i = 0; i < 50; ++i)
            out.push_back(crowd.ask_set(crowd.make_set_task({i % 10}, target_of(triangle()))));
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(SimulatedCrowd, SetAssignmentsAreTasksTimesK) {
    auto c = shapes("tssst");
    SimulatedCrowd crowd(c, CrowdConfig{0.2, 5, 1});
    for (std::size_t i = 0; i < 7; ++i) crowd.ask_set(crowd.make_set_task({i % 5}, target_of(triangle())));
    EXPECT_EQ(crowd.counters().assignments_issued, crowd.counters().tasks_issued * 5);
}

TEST(Aggregation, MajorityAndPlurality) {
    const std::vector<bool> votes{true, true, false};
    EXPECT_EQ(majority(votes), true);
    const std::vector<bool> tie{true, false};
    EXPECT_FALSE(majority(tie).has_value());

    AttributeSchema s({{"race", {"W", "B", "A"}}});
    std::vector<Labels> pv{{0}, {1}, {2}};
    const std::vector<std::size_t> attrs{0};
    EXPECT_FALSE(plurality(pv, attrs, s).has_value());
    pv.push_back({1});
    EXPECT_EQ((*plurality(pv, attrs, s))[0], 1);
}

TEST(Transcript, RecordThenReplay) {
    auto c = shapes(kRunningExample);
    SimulatedCrowd crowd(c, exact());
    RecordingSource rec(crowd, c);
    auto order = c.natural_order();
    auto live = group_coverage(order, 16, 3, triangle(), rec);

    TranscriptSource replay(c, parse_transcript(rec.transcript_jsonl()));
    auto again = group_coverage(order, 16, 3, triangle(), replay);
    EXPECT_EQ(again.covered, live.covered);
    EXPECT_EQ(again.cnt, live.cnt);
    EXPECT_EQ(again.tasks_issued, live.tasks_issued);
}

TEST(Transcript, MissIsAnAnswerSourceFailure) {
    auto c = shapes("ssst");
    TranscriptSource replay(c, {});
    EXPECT_THROW(replay.ask_set(replay.make_set_task({0, 1}, target_of(triangle()))), AnswerSourceError);
}

TEST(Transcript, FingerprintIgnoresItemOrder) {
    auto c = shapes("ssst");
    SimulatedCrowd crowd(c, exact());
    auto a = crowd.make_set_task({2, 0, 1}, target_of(triangle()));
    auto b = crowd.make_set_task({0, 1, 2}, target_of(triangle()));
    EXPECT_EQ(fingerprint(a, c), fingerprint(b, c));
    auto neg = crowd.make_set_task({0, 1, 2}, target_of(triangle(), true));
    EXPECT_NE(fingerprint(a, c), fingerprint(neg, c));
}
