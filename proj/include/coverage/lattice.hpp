#pragma once

// Pattern graph over a schema, bottom-up interval combination, MUP
// extraction, and intersectional coverage built on leaf-level aggregation.

#include "coverage/aggregation.hpp"
#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/group_coverage.hpp"
#include "coverage/io.hpp"
#include "coverage/schema.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coverage {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

enum class Status { Covered, Uncovered, Undecided };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::Covered: return "covered";
        case Status::Uncovered: return "uncovered";
        default: return "undecided";
    }
}

// Count interval [lo, hi]; hi == kUnbounded means no upper bound.
struct Interval {
    std::size_t lo = 0;
    std::size_t hi = kUnbounded;

    static Interval exact(std::size_t v) { return {v, v}; }
    static Interval at_least(std::size_t v) { return {v, kUnbounded}; }
    bool contains(std::size_t v) const { return lo <= v && v <= hi; }
};

inline Status status_of(const Interval& iv, std::size_t tau) {
    if (iv.lo >= tau) return Status::Covered;
    if (iv.hi < tau) return Status::Uncovered;
    return Status::Undecided;
}

inline std::size_t saturating_add(std::size_t a, std::size_t b) {
    return (a == kUnbounded || b == kUnbounded || a > kUnbounded - b) ? kUnbounded : a + b;
}

// The sigma_i children of p along attribute i; they partition p's items.
inline std::vector<Pattern> children_along(const AttributeSchema& schema, const Pattern& p, std::size_t i) {
    if (i >= p.size()) throw std::invalid_argument("attribute index out of range");
    if (p.specified(i)) throw std::invalid_argument("slot " + std::to_string(i) + " is already specified");
    std::vector<Pattern> out;
    for (std::size_t v = 0; v < schema.cardinality(i); ++v) out.push_back(p.with(i, static_cast<ValueIndex>(v)));
    return out;
}

inline std::vector<Pattern> parents_of(const Pattern& p) {
    std::vector<Pattern> out;
    for (auto i : p.specified_slots()) out.push_back(p.without(i));
    return out;
}

class PatternLattice {
public:
    static constexpr std::size_t kMaxAttributes = 5;
    static constexpr std::size_t kMaxCardinality = 10;

    explicit PatternLattice(AttributeSchema schema) : schema_(std::move(schema)) {
        if (schema_.empty()) throw ConfigError("lattice needs at least one attribute");
        if (schema_.size() > kMaxAttributes) throw ConfigError("lattice supports at most 5 attributes");
        for (std::size_t i = 0; i < schema_.size(); ++i)
            if (schema_.cardinality(i) > kMaxCardinality)
                throw ConfigError("lattice supports at most 10 values per attribute");
        std::size_t total = 1;
        for (std::size_t i = 0; i < schema_.size(); ++i) total *= schema_.cardinality(i) + 1;
        patterns_.reserve(total);
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::vector<ValueIndex> slots(schema_.size());
            std::size_t rest = idx;
            for (std::size_t i = schema_.size(); i-- > 0;) {
                const auto radix = schema_.cardinality(i) + 1;
                slots[i] = static_cast<ValueIndex>(rest % radix) - 1;
                rest /= radix;
            }
            patterns_.emplace_back(std::move(slots));
        }
        intervals_.assign(total, Interval{});
        known_.assign(total, false);
    }

    const AttributeSchema& schema() const { return schema_; }
    std::size_t size() const { return patterns_.size(); }
    std::size_t depth() const { return schema_.size(); }
    const Pattern& pattern(std::size_t idx) const { return patterns_.at(idx); }

    std::size_t index(const Pattern& p) const {
        if (p.size() != schema_.size()) throw std::invalid_argument("pattern width does not match schema");
        std::size_t idx = 0;
        for (std::size_t i = 0; i < schema_.size(); ++i)
            idx = idx * (schema_.cardinality(i) + 1) + static_cast<std::size_t>(p.slots()[i] + 1);
        return idx;
    }

    std::vector<std::size_t> level(std::size_t l) const {
        std::vector<std::size_t> out;
        for (std::size_t idx = 0; idx < patterns_.size(); ++idx)
            if (patterns_[idx].level() == l) out.push_back(idx);
        return out;
    }

    const Interval& interval(const Pattern& p) const { return intervals_[index(p)]; }
    bool known(const Pattern& p) const { return known_[index(p)]; }

    // Records direct evidence; later combination only tightens it.
    void set_interval(const Pattern& p, Interval iv) {
        const auto idx = index(p);
        intervals_[idx] = known_[idx] ? intersect(intervals_[idx], iv) : iv;
        known_[idx] = true;
    }

    static Interval intersect(Interval a, Interval b) {
        Interval out{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
        // Contradictory evidence (only possible with noisy answers): keep the lower bound.
        if (out.lo > out.hi) out.hi = out.lo;
        return out;
    }

    void set_derived(std::size_t idx, Interval iv) { intervals_[idx] = iv; }

private:
    AttributeSchema schema_;
    std::vector<Pattern> patterns_;
    std::vector<Interval> intervals_;
    std::vector<bool> known_;
};

struct PatternStatus {
    Pattern pattern;
    Status status = Status::Undecided;
    Interval interval;
};

struct MupReport {
    std::vector<Pattern> mups;            // sorted
    std::vector<PatternStatus> patterns;  // lattice index order

    Status status(const Pattern& p) const {
        for (const auto& s : patterns)
            if (s.pattern == p) return s.status;
        throw std::invalid_argument("pattern not in report");
    }
    std::vector<Pattern> undecided() const {
        std::vector<Pattern> out;
        for (const auto& s : patterns)
            if (s.status == Status::Undecided) out.push_back(s.pattern);
        return out;
    }
};

// Sweeps levels d-1..0; each pattern takes, per unspecified dimension, the
// interval sum over its children along it, and intersects those sums with
// whatever is already known about it.
inline MupReport combine_bottom_up(PatternLattice& lattice, std::size_t tau) {
    const auto d = lattice.depth();
    for (auto idx : lattice.level(d))
        if (!lattice.known(lattice.pattern(idx)))
            throw std::invalid_argument("missing interval for leaf " +
                                        to_x_notation(lattice.schema(), lattice.pattern(idx)));

    for (std::size_t l = d; l-- > 0;) {
        for (auto idx : lattice.level(l)) {
            const auto& p = lattice.pattern(idx);
            Interval iv = lattice.known(p) ? lattice.interval(p) : Interval{};
            for (std::size_t i = 0; i < d; ++i) {
                if (p.specified(i)) continue;
                Interval sum{0, 0};
                for (const auto& ch : children_along(lattice.schema(), p, i)) {
                    const auto& c = lattice.interval(ch);
                    sum.lo = saturating_add(sum.lo, c.lo);
                    sum.hi = saturating_add(sum.hi, c.hi);
                }
                iv = PatternLattice::intersect(iv, sum);
            }
            lattice.set_derived(idx, iv);
        }
    }

    MupReport report;
    for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
        const auto& p = lattice.pattern(idx);
        report.patterns.push_back({p, status_of(lattice.interval(p), tau), lattice.interval(p)});
    }
    for (const auto& s : report.patterns) {
        if (s.status != Status::Uncovered) continue;
        bool parents_covered = true;
        for (const auto& par : parents_of(s.pattern))
            if (status_of(lattice.interval(par), tau) != Status::Covered) parents_covered = false;
        if (parents_covered) report.mups.push_back(s.pattern);
    }
    std::sort(report.mups.begin(), report.mups.end());
    return report;
}

inline json interval_to_json(const PatternStatus& s, const AttributeSchema& schema) {
    return json{{"pattern", to_x_notation(schema, s.pattern)},
                {"status", to_string(s.status)},
                {"lo", s.interval.lo},
                {"hi", s.interval.hi == kUnbounded ? json(nullptr) : json(s.interval.hi)}};
}

inline json mups_to_json(const MupReport& r, const AttributeSchema& schema) {
    json out = json::array();
    for (const auto& m : r.mups)
        for (const auto& s : r.patterns)
            if (s.pattern == m) out.push_back(interval_to_json(s, schema));
    return out;
}

inline json report_to_json(const MupReport& r, const AttributeSchema& schema) {
    json all = json::array();
    for (const auto& s : r.patterns) all.push_back(interval_to_json(s, schema));
    return json{{"mups", mups_to_json(r, schema)}, {"patterns", std::move(all)}};
}

struct IntersectionalResult {
    MupReport report;
    MultipleResult leaves;
    std::size_t requeries = 0;       // undecided patterns resolved directly
    std::size_t requery_tasks = 0;
    std::size_t tasks_issued = 0;
    std::size_t assignments_issued = 0;
};

inline IntersectionalResult intersectional_coverage(const ItemCollection& collection,
                                                    std::span<const std::size_t> order, std::size_t n,
                                                    std::size_t tau, AnswerSource& source,
                                                    const MultipleOptions& base_opts = {}) {
    const auto& schema = collection.schema();
    const auto tasks_before = source.counters().tasks_issued;
    const auto assignments_before = source.counters().assignments_issued;

    PatternLattice lattice(schema);
    const auto leaves = fully_specified_groups(schema);
    MultipleOptions opts = base_opts;
    opts.multi = true;

    IntersectionalResult res;
    res.leaves = multiple_coverage(collection, order, n, tau, leaves, source, opts);
    for (const auto& v : res.leaves.verdicts) {
        const auto& p = v.groups.front().pattern;
        lattice.set_interval(p, v.covered ? Interval::at_least(tau) : Interval{v.cnt, v.count_upper()});
    }
    lattice.set_interval(Pattern(schema.size()), Interval::exact(order.size()));

    res.report = combine_bottom_up(lattice, tau);
    // Resolve the deepest undecided patterns first; their intervals feed the levels above.
    while (true) {
        auto open = res.report.undecided();
        if (open.empty()) break;
        std::size_t deepest = 0;
        for (const auto& p : open) deepest = std::max(deepest, p.level());
        for (const auto& p : open) {
            if (p.level() != deepest) continue;
            const auto known = res.leaves.pool.count(p);
            ++res.requeries;
            if (known >= tau) {
                lattice.set_interval(p, Interval::at_least(tau));
                continue;
            }
            EngineOptions eo;
            eo.phase = "pattern-requery";
            auto v = group_coverage(res.leaves.working_order, n, tau - known, make_group(schema, p), source, eo);
            res.requery_tasks += v.tasks_issued;
            lattice.set_interval(p, v.covered ? Interval::at_least(tau) : Interval::exact(known + v.cnt));
        }
        res.report = combine_bottom_up(lattice, tau);
    }
    res.tasks_issued = source.counters().tasks_issued - tasks_before;
    res.assignments_issued = source.counters().assignments_issued - assignments_before;
    return res;
}

inline IntersectionalResult intersectional_coverage(const ItemCollection& collection, std::size_t n, std::size_t tau,
                                                    AnswerSource& source, const MultipleOptions& opts = {}) {
    auto order = collection.natural_order();
    return intersectional_coverage(collection, order, n, tau, source, opts);
}

inline json intersectional_result_to_json(const IntersectionalResult& r, const AttributeSchema& schema) {
    auto out = report_to_json(r.report, schema);
    out["covered"] = r.report.mups.empty();
    out["cnt"] = r.report.mups.size();
    out["tasks"] = r.tasks_issued;
    out["assignments"] = r.assignments_issued;
    out["requeries"] = r.requeries;
    out["requery_tasks"] = r.requery_tasks;
    return out;
}

} // namespace coverage
