#include "coverage/harness.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace coverage;

TEST(Generate, PlantedCountsAndDeterminism) {
    auto c = generate_binary(100000, 50, 3);
    EXPECT_EQ(true_count(c, Pattern(Labels{0})), 50u);
    auto feret = generate_binary(1522, 215, 1);
    EXPECT_EQ(true_count(feret, Pattern(Labels{0})), 215u);
    EXPECT_EQ(true_count(feret, Pattern(Labels{1})), 1307u);
    auto a = generate_binary(500, 40, 11), b = generate_binary(500, 40, 11), d = generate_binary(500, 40, 12);
    bool same = true, differs = false;
    for (std::size_t i = 0; i < 500; ++i) {
        same = same && *a[i].truth == *b[i].truth;
        differs = differs || *a[i].truth != *d[i].truth;
    }
    EXPECT_TRUE(same);
    EXPECT_TRUE(differs);
    EXPECT_EQ(a[0].id, "i000001");
}

TEST(Generate, CountMismatchIsAConfigError) {
    EXPECT_THROW(generate(binary_schema(), 10, {{Labels{0}, 3}, {Labels{1}, 3}}, 0), ConfigError);
    EXPECT_THROW(generate(binary_schema(), 10, {{Labels{kUnspecified}, 10}}, 0), ConfigError);
}

TEST(Presets, SigmaFourSettings) {
    for (const auto& name : preset_names()) {
        auto p = preset(name);
        auto c = generate(p.schema, 10000, preset_counts(p, 10000), 1);
        EXPECT_EQ(c.size(), 10000u);
        EXPECT_EQ(p.schema.cardinality(0), 4u);
    }
    auto e1 = preset("effective1");
    std::size_t minor = 0;
    for (auto m : e1.minorities) minor += m;
    EXPECT_LT(minor, 50u);  // union of minorities is uncovered
    auto adv = preset("adversarial");
    minor = 0;
    for (auto m : adv.minorities) {
        EXPECT_LT(m, 50u);
        minor += m;
    }
    EXPECT_GE(minor, 50u);  // union covered, members not
    EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Predictions, PlantedPrecision) {
    auto c = generate_binary(1000, 200, 1);
    const auto g = make_group(c.schema(), Pattern(Labels{0}));
    auto pc = plant_predictions(c, g, 100, 60, 5);
    auto ps = make_predictions(pc, g);
    ASSERT_EQ(ps.predicted.size(), 100u);
    std::size_t tp = 0;
    for (auto i : ps.predicted) tp += match(pc.truth(i), g.pattern) ? 1 : 0;
    EXPECT_EQ(tp, 60u);
    EXPECT_EQ(ps.complement.size(), 900u);
    EXPECT_THROW(plant_predictions(c, g, 100, 300, 5), ConfigError);
}

TEST(Sweep, RowsSortedAndReproducible) {
    auto spec = spec_from_json(json::parse(R"({
        "algorithm": "group", "N": 2000, "n": 50, "tau": 20, "seeds": [3, 1, 2],
        "sweep": {"param": "f", "values": [40, 0, 20]}, "baseline": true, "threads": 2 })"));
    auto rows = sweep(spec);
    ASSERT_EQ(rows.size(), 9u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto prev = std::make_pair(rows[i - 1].param_value, rows[i - 1].seed);
        const auto cur = std::make_pair(rows[i].param_value, rows[i].seed);
        EXPECT_LT(prev, cur);
    }
    for (const auto& r : rows) {
        EXPECT_EQ(r.covered, r.param_value >= 20);
        EXPECT_LE(r.tasks, task_bound(r.N, r.n, r.tau));
        EXPECT_TRUE(r.baseline_tasks.has_value());
        EXPECT_EQ(r.upper_bound, reported_upper_bound(2000, 50, 20));
    }
    EXPECT_EQ(to_csv(rows), to_csv(sweep(spec)));
    const auto csv = to_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
}

TEST(Sweep, EveryAlgorithmRuns) {
    for (const char* text : {
             R"({"algorithm": "base", "N": 500, "tau": 10, "f": 30})",
             R"({"algorithm": "multiple", "N": 3000, "tau": 20, "preset": "effective1"})",
             R"({"algorithm": "intersectional", "N": 1000, "tau": 20,
                 "schema": {"attributes": [{"name": "g", "values": ["F", "M"]}, {"name": "r", "values": ["W", "B"]}]},
                 "counts": {"g=F,r=B": 10, "g=M,r=B": 30}, "rest": "g=M,r=W"})",
             R"({"algorithm": "classifier", "N": 3000, "tau": 50, "f": 100,
                 "classifier": {"predicted": 100, "precision": 0.99}, "baseline": true})"}) {
        auto rows = sweep(spec_from_json(json::parse(text)));
        ASSERT_EQ(rows.size(), 1u) << text;
        EXPECT_GT(rows[0].tasks, 0u) << text;
    }
}

TEST(Sweep, IntersectionalRowCountsMups) {
    auto spec = spec_from_json(json::parse(R"({"algorithm": "intersectional", "N": 1000, "tau": 20,
        "schema": {"attributes": [{"name": "g", "values": ["F", "M"]}, {"name": "r", "values": ["W", "B"]}]},
        "counts": {"g=F,r=B": 10, "g=M,r=B": 30, "g=F,r=W": 300}, "rest": "g=M,r=W"})"));
    auto rows = sweep(spec);
    EXPECT_FALSE(rows[0].covered);
    EXPECT_EQ(rows[0].cnt, 1u);  // FB is the only MUP
}

TEST(Spec, Validation) {
    EXPECT_THROW(spec_from_json(json::parse(R"({"algorithm": "magic"})")), ConfigError);
    EXPECT_THROW(spec_from_json(json::parse(R"({"sweep": {"param": "zeta", "values": [1]}})")), ConfigError);
    EXPECT_THROW(spec_from_json(json::parse(R"({"N": "many"})")), ConfigError);
    EXPECT_THROW(sweep(spec_from_json(json::parse(R"({"algorithm": "group", "N": 10})"))), ConfigError);
    auto s = spec_from_json(json::parse(R"({"seeds": 4})"));
    EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3}));
}

TEST(Report, SummarizesPerParameterValue) {
    auto spec = spec_from_json(json::parse(R"({"algorithm": "group", "N": 1000, "tau": 10, "seeds": 3,
        "sweep": {"param": "f", "values": [0, 20]}})"));
    auto lines = summarize(to_csv(sweep(spec)));
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0].runs, 3u);
    EXPECT_DOUBLE_EQ(lines[0].covered_rate, 0.0);
    EXPECT_DOUBLE_EQ(lines[1].covered_rate, 1.0);
    EXPECT_DOUBLE_EQ(lines[0].mean_tasks, 20.0);  // every root answers no
    EXPECT_THROW(summarize("a,b\n1,2\n"), ConfigError);
    EXPECT_NE(report_text(lines).find("group,f,20,3,1.000"), std::string::npos);
}
