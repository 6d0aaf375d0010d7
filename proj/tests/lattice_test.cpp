#include "coverage/harness.hpp"
#include "coverage/lattice.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace coverage;
using namespace coverage::testing;

namespace {

AttributeSchema gender_race() { return AttributeSchema({{"gender", {"F", "M"}}, {"race", {"W", "B", "A"}}}); }

// Random schema with d <= 3, sigma <= 4 and a random leaf distribution
// that puts many leaves near tau.
ItemCollection random_lattice_instance(std::mt19937_64& rng, std::size_t& tau, std::size_t max_n = 5000) {
    const std::size_t d = 1 + rng() % 3;
    std::vector<Attribute> attrs;
    for (std::size_t a = 0; a < d; ++a) {
        std::vector<std::string> vals;
        const std::size_t sigma = 2 + rng() % 3;
        for (std::size_t v = 0; v < sigma; ++v) vals.push_back("v" + std::to_string(v));
        attrs.push_back({"a" + std::to_string(a), vals});
    }
    AttributeSchema schema(attrs);
    tau = 5 + rng() % 40;
    const auto leaves = fully_specified_groups(schema);
    PlantedCounts counts;
    std::size_t N = 0;
    for (const auto& leaf : leaves) {
        std::size_t cnt;
        switch (rng() % 4) {
            case 0: cnt = rng() % (tau / 2 + 1); break;
            case 1: cnt = tau - 3 + rng() % 7; break;
            case 2: cnt = rng() % (3 * tau); break;
            default: cnt = rng() % (max_n / leaves.size() + 1);
        }
        counts.push_back({Labels(leaf.pattern.slots().begin(), leaf.pattern.slots().end()), cnt});
        N += cnt;
    }
    return generate(schema, N, counts, rng());
}

} // namespace

TEST(Lattice, NodeCountAndIndexing) {
    PatternLattice l(gender_race());
    EXPECT_EQ(l.size(), 12u);
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_EQ(l.index(l.pattern(i)), i);
    EXPECT_EQ(l.level(0).size(), 1u);
    EXPECT_EQ(l.level(1).size(), 5u);
    EXPECT_EQ(l.level(2).size(), 6u);
    EXPECT_THROW(PatternLattice(AttributeSchema({{"a", {"0", "1"}}, {"b", {"0", "1"}}, {"c", {"0", "1"}},
                                                 {"d", {"0", "1"}}, {"e", {"0", "1"}}, {"f", {"0", "1"}}})),
                 ConfigError);
}

TEST(Lattice, ChildrenAlong) {
    const auto s = gender_race();
    auto kids = children_along(s, parse_pattern(s, "F"), 1);
    ASSERT_EQ(kids.size(), 3u);
    EXPECT_EQ(to_x_notation(s, kids[0]), "FW");
    EXPECT_EQ(to_x_notation(s, kids[2]), "FA");
    EXPECT_THROW(children_along(s, parse_pattern(s, "F,B"), 0), std::invalid_argument);
}

TEST(Lattice, ChildrenPartitionParent) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t tau;
        auto c = random_lattice_instance(rng, tau, 800);
        PatternLattice l(c.schema());
        for (std::size_t idx = 0; idx < l.size(); ++idx) {
            const auto& p = l.pattern(idx);
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p.specified(i)) continue;
                std::size_t sum = 0;
                for (const auto& ch : children_along(c.schema(), p, i)) sum += true_count(c, ch);
                EXPECT_EQ(sum, true_count(c, p));
            }
        }
    }
}

TEST(Combine, AsianExamples) {
    const auto s = gender_race();
    auto run = [&](std::size_t af, std::size_t am) {
        PatternLattice l(s);
        for (const auto& leaf : fully_specified_groups(s))
            if (leaf.pattern[1] != 2) l.set_interval(leaf.pattern, Interval::at_least(50));
        l.set_interval(parse_pattern(s, "F,A"), Interval::exact(af));
        l.set_interval(parse_pattern(s, "M,A"), Interval::exact(am));
        auto r = combine_bottom_up(l, 50);
        return std::make_pair(r.status(parse_pattern(s, "A")), l.interval(parse_pattern(s, "A")));
    };
    auto [st1, iv1] = run(15, 20);
    EXPECT_EQ(st1, Status::Uncovered);
    EXPECT_EQ(iv1.lo, 35u);
    EXPECT_EQ(iv1.hi, 35u);
    auto [st2, iv2] = run(28, 32);
    EXPECT_EQ(st2, Status::Covered);
    EXPECT_EQ(iv2.lo, 60u);
}

TEST(Combine, CoveredChildCoversParents) {
    const auto s = gender_race();
    PatternLattice l(s);
    for (const auto& leaf : fully_specified_groups(s)) l.set_interval(leaf.pattern, Interval::exact(1));
    l.set_interval(parse_pattern(s, "M,W"), Interval::at_least(50));
    auto r = combine_bottom_up(l, 50);
    EXPECT_EQ(r.status(parse_pattern(s, "M")), Status::Covered);
    EXPECT_EQ(r.status(parse_pattern(s, "W")), Status::Covered);
    EXPECT_EQ(r.status(Pattern(2)), Status::Covered);
    EXPECT_EQ(r.status(parse_pattern(s, "F")), Status::Uncovered);
    // F is uncovered under a covered root: a MUP; its leaves are not
    EXPECT_NE(std::find(r.mups.begin(), r.mups.end(), parse_pattern(s, "F")), r.mups.end());
    EXPECT_EQ(std::find(r.mups.begin(), r.mups.end(), parse_pattern(s, "F,W")), r.mups.end());
}

TEST(Combine, MissingLeafIsAnError) {
    PatternLattice l(gender_race());
    EXPECT_THROW(combine_bottom_up(l, 5), std::invalid_argument);
    PatternLattice twice(gender_race());
    twice.set_interval(parse_pattern(gender_race(), "F,W"), Interval{3, 9});
    twice.set_interval(parse_pattern(gender_race(), "F,W"), Interval{5, 20});
    EXPECT_EQ(twice.interval(parse_pattern(gender_race(), "F,W")).lo, 5u);
    EXPECT_EQ(twice.interval(parse_pattern(gender_race(), "F,W")).hi, 9u);
}

TEST(Combine, ReportJsonUsesXNotation) {
    const auto s = gender_race();
    PatternLattice l(s);
    for (const auto& leaf : fully_specified_groups(s)) l.set_interval(leaf.pattern, Interval::exact(1));
    auto r = combine_bottom_up(l, 7);
    auto j = mups_to_json(r, s);
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0]["pattern"], "XX");
    EXPECT_EQ(j[0]["status"], "uncovered");
    EXPECT_EQ(j[0]["lo"], 6);
    EXPECT_EQ(j[0]["hi"], 6);
    auto all = report_to_json(r, s);
    EXPECT_EQ(all["patterns"].size(), 12u);
}

TEST(Intersectional, AllLeavesCoveredMeansNoMups) {
    const auto s = gender_race();
    PlantedCounts counts;
    for (const auto& leaf : fully_specified_groups(s))
        counts.push_back({Labels(leaf.pattern.slots().begin(), leaf.pattern.slots().end()), 400});
    auto c = generate(s, 2400, counts, 1);
    SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
    auto r = intersectional_coverage(c, 50, 50, crowd);
    EXPECT_TRUE(r.report.mups.empty());
    EXPECT_EQ(r.requeries, 0u);
    for (const auto& p : r.report.patterns) EXPECT_EQ(p.status, Status::Covered);
}

TEST(Intersectional, MatchesOracleOnRandomInstances) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t tau;
        auto c = random_lattice_instance(rng, tau);
        SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
        MultipleOptions opts;
        opts.seed = rng();
        auto r = intersectional_coverage(c, 1 + rng() % 64, tau, crowd, opts);
        const auto oracle = oracle_lattice(c, tau);
        ASSERT_EQ(r.report.mups, oracle.mups) << "trial " << trial;
        for (const auto& ps : r.report.patterns) {
            const auto truth = oracle.counts.at(ps.pattern);
            EXPECT_EQ(ps.status == Status::Covered, truth >= tau);
            EXPECT_NE(ps.status, Status::Undecided);
            EXPECT_TRUE(ps.interval.contains(truth)) << to_x_notation(c.schema(), ps.pattern);
        }
        if (c.size() >= tau) {
            EXPECT_EQ(r.report.status(Pattern(c.schema().size())), Status::Covered);
        }
    }
}

TEST(Intersectional, MupsFormAnAntichain) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t tau;
        auto c = random_lattice_instance(rng, tau, 2000);
        SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
        auto r = intersectional_coverage(c, 32, tau, crowd);
        for (const auto& a : r.report.mups)
            for (const auto& b : r.report.mups)
                if (!(a == b)) {
                    EXPECT_FALSE(a.generalizes(b));
                }
    }
}

TEST(Intersectional, CardinalityDrivesCost) {
    // sigma = (2, 4) and three binary attributes both have 8 leaves
    AttributeSchema two({{"x", {"0", "1"}}, {"y", {"0", "1", "2", "3"}}});
    AttributeSchema three({{"x", {"0", "1"}}, {"y", {"0", "1"}}, {"z", {"0", "1"}}});
    const std::vector<std::size_t> leaf_counts{9000, 300, 200, 150, 100, 30, 20, 200};
    auto mean_tasks = [&](const AttributeSchema& s) {
        const auto leaves = fully_specified_groups(s);
        PlantedCounts counts;
        for (std::size_t i = 0; i < leaves.size(); ++i)
            counts.push_back({Labels(leaves[i].pattern.slots().begin(), leaves[i].pattern.slots().end()), leaf_counts[i]});
        double total = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto c = generate(s, 10000, counts, seed);
            SimulatedCrowd crowd(c, CrowdConfig{0.0, 1, 0});
            MultipleOptions o;
            o.seed = seed;
            total += static_cast<double>(intersectional_coverage(c, 50, 50, crowd, o).tasks_issued);
        }
        return total / 10;
    };
    const double a = mean_tasks(two), b = mean_tasks(three);
    EXPECT_LT(std::max(a, b) / std::min(a, b), 2.0);
}
