#pragma once

#include "coverage/collection.hpp"
#include "coverage/schema.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace coverage {

enum class TaskKind { Set, Point };

inline const char* to_string(TaskKind k) { return k == TaskKind::Set ? "set" : "point"; }

// Set-query predicate: "does the set contain any item matching one of
// `members`" (a super-group when there is more than one member), or its
// reverse when `negated` ("... any item NOT matching").
struct Target {
    std::vector<Pattern> members;
    bool negated = false;
    std::string name;

    bool contains(std::span<const ValueIndex> labels) const {
        return std::any_of(members.begin(), members.end(), [&](const Pattern& p) { return match(labels, p); });
    }
};

inline Target target_of(const Group& g, bool negated = false) { return Target{{g.pattern}, negated, g.name}; }

inline Target target_of(std::span<const Group> groups) {
    Target t;
    for (const auto& g : groups) {
        t.members.push_back(g.pattern);
        if (!t.name.empty()) t.name += " or ";
        t.name += g.name;
    }
    return t;
}

struct QueryTask {
    std::uint64_t seq = 0;    // position in the run's task stream
    std::string id;           // "t<seq>"
    TaskKind kind = TaskKind::Set;
    std::vector<std::size_t> items;      // collection indices; singleton for Point
    Target target;                       // Set only
    std::vector<std::size_t> attributes; // Point only: attributes asked about
    unsigned required_assignments = 1;
    std::string phase;
};

// Why a published task was withdrawn: its answer was deduced from a
// sibling (always yes), or the run no longer needs it.
enum class CancelReason { Unneeded, Inferred };

// Aggregated answer: yes/no for Set tasks, labels for Point tasks.
using Aggregate = std::variant<bool, Labels>;

// Stable identity of a question, independent of when it was asked:
// kind, sorted item ids, target members and negation (or asked attributes).
inline std::string fingerprint(const QueryTask& t, const ItemCollection& c) {
    std::vector<std::string> ids;
    ids.reserve(t.items.size());
    for (auto i : t.items) ids.push_back(c[i].id);
    std::sort(ids.begin(), ids.end());
    std::string out = to_string(t.kind);
    out += '|';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ',';
        out += ids[i];
    }
    out += '|';
    if (t.kind == TaskKind::Set) {
        for (std::size_t m = 0; m < t.target.members.size(); ++m) {
            if (m) out += ';';
            out += to_assignment_string(c.schema(), t.target.members[m]);
        }
        out += t.target.negated ? "|not" : "|is";
    } else {
        for (std::size_t a = 0; a < t.attributes.size(); ++a) {
            if (a) out += ',';
            out += c.schema().attribute(t.attributes[a]).name;
        }
    }
    return out;
}

// Question wording shown to workers.
inline std::string question_text(const QueryTask& t, const AttributeSchema& schema) {
    if (t.kind == TaskKind::Set) {
        return t.target.negated ? "Is there any individual in this set that is NOT " + t.target.name + "?"
                                : "Is there at least one " + t.target.name + " in this set?";
    }
    std::string attrs;
    for (std::size_t a = 0; a < t.attributes.size(); ++a) {
        if (a) attrs += a + 1 == t.attributes.size() ? " and " : ", ";
        attrs += schema.attribute(t.attributes[a]).name;
    }
    return "What is the " + attrs + " of this individual?";
}

// Majority over yes/no votes; nullopt on an exact tie.
inline std::optional<bool> majority(const std::vector<bool>& votes) {
    std::size_t yes = 0;
    for (bool v : votes) yes += v ? 1 : 0;
    const std::size_t no = votes.size() - yes;
    if (votes.empty() || yes == no) return std::nullopt;
    return yes > no;
}

// Per-attribute plurality over point answers; nullopt while any asked
// attribute has a tied top value (or there are no votes).
inline std::optional<Labels> plurality(std::span<const Labels> votes, std::span<const std::size_t> attributes,
                                       const AttributeSchema& schema) {
    if (votes.empty()) return std::nullopt;
    Labels out(schema.size(), kUnspecified);
    for (auto a : attributes) {
        std::vector<std::size_t> tally(schema.cardinality(a), 0);
        for (const auto& v : votes)
            if (a < v.size() && v[a] != kUnspecified) ++tally.at(static_cast<std::size_t>(v[a]));
        auto best = std::max_element(tally.begin(), tally.end());
        if (*best == 0 || std::count(tally.begin(), tally.end(), *best) > 1) return std::nullopt;
        out[a] = static_cast<ValueIndex>(best - tally.begin());
    }
    return out;
}

} // namespace coverage
