#pragma once

// Sampling phase, greedy super-group formation, and coverage of the values
// of one attribute (or of sibling leaf subgroups) with shared engine runs.

#include "coverage/answer_source.hpp"
#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/group_coverage.hpp"
#include "coverage/schema.hpp"
#include "coverage/verdict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace coverage {

// Items labeled by point queries, keyed by collection index.
class LabeledPool {
public:
    void add(std::size_t item, Labels labels) { entries_[item] = std::move(labels); }
    bool contains(std::size_t item) const { return entries_.count(item) != 0; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::map<std::size_t, Labels>& entries() const { return entries_; }

    std::size_t count(const Pattern& p) const {
        std::size_t n = 0;
        for (const auto& [item, labels] : entries_) n += match(labels, p) ? 1 : 0;
        return n;
    }
    std::size_t count(const Group& g) const { return count(g.pattern); }

private:
    std::map<std::size_t, Labels> entries_;
};

struct SuperGroup {
    std::vector<Group> members;
    double expected_total = 0.0;

    bool singleton() const { return members.size() == 1; }
};

struct SampleResult {
    std::vector<std::size_t> working_order;  // input order minus the sampled items
    LabeledPool pool;
    std::size_t tasks_issued = 0;
};

// Point-queries min(c*tau, |order|) random items for every attribute.
inline SampleResult label_samples(const ItemCollection& collection, std::span<const std::size_t> order, std::size_t tau,
                                  double c, AnswerSource& source, std::uint64_t seed,
                                  const std::string& phase = "label-samples") {
    if (c < 1.0) throw ConfigError("sampling factor c must be at least 1");
    const auto wanted = static_cast<std::size_t>(std::ceil(c * static_cast<double>(tau) - 1e-9));
    const auto k = std::min(wanted, order.size());

    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::mt19937_64 rng(seed);
    std::sample(order.begin(), order.end(), std::back_inserter(chosen), k, rng);

    std::vector<std::size_t> attrs(collection.schema().size());
    std::iota(attrs.begin(), attrs.end(), std::size_t{0});

    SampleResult out;
    std::vector<QueryTask> tasks;
    for (auto item : chosen) {
        tasks.push_back(source.make_point_task(item, attrs, phase));
        source.publish(tasks.back());
    }
    for (const auto& t : tasks) {
        out.pool.add(t.items.front(), source.ask_point(t));
        ++out.tasks_issued;
    }
    for (auto item : order)
        if (!out.pool.contains(item)) out.working_order.push_back(item);
    return out;
}

inline SampleResult label_samples(const ItemCollection& collection, std::size_t tau, double c, AnswerSource& source,
                                  std::uint64_t seed) {
    auto order = collection.natural_order();
    return label_samples(collection, order, tau, c, source, seed);
}

namespace detail {

inline std::vector<SuperGroup> greedy_sweep(std::vector<Group> groups, const LabeledPool& pool, double N, double tau) {
    std::stable_sort(groups.begin(), groups.end(),
                     [&](const Group& a, const Group& b) { return pool.count(a) < pool.count(b); });
    const double scale = N / static_cast<double>(pool.size());
    std::vector<SuperGroup> out;
    for (auto& g : groups) {
        const double e = scale * static_cast<double>(pool.count(g));
        if (!out.empty() && out.back().expected_total + e < tau) {
            out.back().members.push_back(std::move(g));
            out.back().expected_total += e;
        } else {
            out.push_back(SuperGroup{{std::move(g)}, e});
        }
    }
    return out;
}

} // namespace detail

// Greedy aggregation of low-count groups.  In multi mode only groups that
// agree on every slot except `dimension` are merged.
inline std::vector<SuperGroup> aggregate(const LabeledPool& pool, std::size_t N, std::size_t tau,
                                         const std::vector<Group>& groups, bool multi = false,
                                         std::optional<std::size_t> dimension = std::nullopt) {
    if (pool.empty()) throw std::invalid_argument("aggregate needs a non-empty labeled pool");
    if (groups.empty()) return {};
    if (!multi) return detail::greedy_sweep(groups, pool, static_cast<double>(N), static_cast<double>(tau));

    const std::size_t dim = dimension.value_or(groups.front().pattern.size() - 1);
    std::vector<Pattern> keys;
    std::vector<std::vector<Group>> blocks;
    for (const auto& g : groups) {
        if (dim >= g.pattern.size() || !g.pattern.specified(dim))
            throw std::invalid_argument("group " + g.name + " does not specify the aggregation dimension");
        const Pattern key = g.pattern.without(dim);
        auto it = std::find(keys.begin(), keys.end(), key);
        if (it == keys.end()) {
            keys.push_back(key);
            blocks.emplace_back();
            it = keys.end() - 1;
        }
        blocks[static_cast<std::size_t>(it - keys.begin())].push_back(g);
    }
    std::vector<SuperGroup> out;
    for (auto& block : blocks) {
        auto part = detail::greedy_sweep(std::move(block), pool, static_cast<double>(N), static_cast<double>(tau));
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

struct MultipleOptions {
    double c = 2.0;
    std::uint64_t seed = 0;
    bool multi = false;
    std::optional<std::size_t> dimension;  // multi mode; default: last attribute
};

struct MultipleResult {
    std::vector<CoverageVerdict> verdicts;  // one per input group, input order
    std::vector<SuperGroup> super_groups;
    std::vector<CoverageVerdict> super_group_runs;  // one per super-group
    LabeledPool pool;
    std::vector<std::size_t> working_order;
    std::size_t sampling_tasks = 0;
    std::size_t tasks_issued = 0;
    std::size_t assignments_issued = 0;

    bool all_covered() const {
        return std::all_of(verdicts.begin(), verdicts.end(), [](const CoverageVerdict& v) { return v.covered; });
    }
    std::size_t uncovered_count() const {
        return static_cast<std::size_t>(
            std::count_if(verdicts.begin(), verdicts.end(), [](const CoverageVerdict& v) { return !v.covered; }));
    }
};

namespace detail {

// Coverage of g on the reduced order given `known` pool matches.
inline CoverageVerdict covered_after_pool(std::span<const std::size_t> order, std::size_t n, std::size_t tau,
                                          std::vector<Group> groups, std::size_t known, AnswerSource& source,
                                          const std::string& phase) {
    if (known >= tau) {
        CoverageVerdict v;
        v.groups = std::move(groups);
        v.covered = true;
        v.cnt = tau;
        return v;
    }
    EngineOptions opts;
    opts.phase = phase;
    auto v = group_coverage(order, n, tau - known, std::move(groups), source, opts);
    v.cnt = v.covered ? tau : v.cnt + known;
    return v;
}

} // namespace detail

inline MultipleResult multiple_coverage(const ItemCollection& collection, std::span<const std::size_t> order,
                                        std::size_t n, std::size_t tau, const std::vector<Group>& groups,
                                        AnswerSource& source, const MultipleOptions& opts = {}) {
    if (groups.empty()) throw std::invalid_argument("multiple_coverage needs at least one group");
    if (tau == 0) throw std::invalid_argument("coverage threshold must be at least 1");
    const auto tasks_before = source.counters().tasks_issued;
    const auto assignments_before = source.counters().assignments_issued;

    MultipleResult res;
    auto sample = label_samples(collection, order, tau, opts.c, source, opts.seed);
    res.pool = std::move(sample.pool);
    res.working_order = std::move(sample.working_order);
    res.sampling_tasks = sample.tasks_issued;

    std::map<Pattern, CoverageVerdict> by_pattern;
    if (res.pool.empty()) {
        for (const auto& g : groups) {
            CoverageVerdict v;
            v.groups = {g};
            by_pattern[g.pattern] = v;
        }
    } else {
        res.super_groups = aggregate(res.pool, order.size(), tau, groups, opts.multi, opts.dimension);
    }

    for (const auto& sg : res.super_groups) {
        std::size_t known = 0;
        for (const auto& g : sg.members) known += res.pool.count(g);
        auto run = detail::covered_after_pool(res.working_order, n, tau, sg.members, known, source,
                                              sg.singleton() ? "group-coverage" : "super-group");
        res.super_group_runs.push_back(run);

        if (sg.singleton()) {
            by_pattern[sg.members.front().pattern] = run;
        } else if (run.covered) {
            for (const auto& g : sg.members) {
                auto v = detail::covered_after_pool(res.working_order, n, tau, {g}, res.pool.count(g), source,
                                                    "member-rerun");
                v.tasks_issued += run.tasks_issued;
                v.assignments_issued += run.assignments_issued;
                by_pattern[g.pattern] = std::move(v);
            }
        } else {
            // The union count on the reduced order bounds every member's share.
            const std::size_t union_engine = run.cnt - known;
            for (const auto& g : sg.members) {
                CoverageVerdict v;
                v.groups = {g};
                v.covered = false;
                v.cnt = res.pool.count(g);
                v.cnt_upper = v.cnt + union_engine;
                v.tasks_issued = run.tasks_issued;
                v.assignments_issued = run.assignments_issued;
                by_pattern[g.pattern] = std::move(v);
            }
        }
    }

    for (const auto& g : groups) res.verdicts.push_back(by_pattern.at(g.pattern));
    res.tasks_issued = source.counters().tasks_issued - tasks_before;
    res.assignments_issued = source.counters().assignments_issued - assignments_before;
    return res;
}

inline MultipleResult multiple_coverage(const ItemCollection& collection, std::size_t n, std::size_t tau,
                                        const std::vector<Group>& groups, AnswerSource& source,
                                        const MultipleOptions& opts = {}) {
    auto order = collection.natural_order();
    return multiple_coverage(collection, order, n, tau, groups, source, opts);
}

inline json multiple_result_to_json(const MultipleResult& r) {
    json groups = json::array(), supers = json::array();
    for (const auto& v : r.verdicts) groups.push_back(verdict_to_json(v));
    for (const auto& sg : r.super_groups) {
        json names = json::array();
        for (const auto& g : sg.members) names.push_back(g.name);
        supers.push_back(std::move(names));
    }
    return json{{"covered", r.all_covered()},
                {"cnt", r.uncovered_count()},
                {"tasks", r.tasks_issued},
                {"assignments", r.assignments_issued},
                {"sampling_tasks", r.sampling_tasks},
                {"super_groups", std::move(supers)},
                {"groups", std::move(groups)}};
}

} // namespace coverage
