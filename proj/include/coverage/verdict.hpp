#pragma once

#include "coverage/io.hpp"
#include "coverage/query.hpp"
#include "coverage/schema.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coverage {

struct TraceEntry {
    std::string task;
    bool answer = false;
    bool inferred = false;  // deduced for free; never sent to the source
};

struct CoverageVerdict {
    std::vector<Group> groups;  // one group, or the members of a super-group
    bool covered = false;
    std::size_t cnt = 0;        // tau when covered, otherwise the (lower bound of the) count
    // Upper end of the count interval when it is not exact; nullopt means
    // exact (uncovered) or unbounded (covered).
    std::optional<std::size_t> cnt_upper;
    std::size_t tasks_issued = 0;
    std::size_t assignments_issued = 0;
    std::vector<TraceEntry> trace;

    std::string group_name() const {
        std::string out;
        for (const auto& g : groups) {
            if (!out.empty()) out += " or ";
            out += g.name;
        }
        return out;
    }

    std::size_t count_upper() const { return cnt_upper.value_or(cnt); }
};

inline json verdict_to_json(const CoverageVerdict& v) {
    json trace = json::array();
    for (const auto& t : v.trace)
        trace.push_back({{"task", t.task}, {"answer", t.answer ? "yes" : "no"}, {"inferred", t.inferred}});
    json out{{"group", v.group_name()},
             {"covered", v.covered},
             {"cnt", v.cnt},
             {"tasks", v.tasks_issued},
             {"assignments", v.assignments_issued},
             {"trace", std::move(trace)}};
    if (v.cnt_upper) out["cnt_upper"] = *v.cnt_upper;
    return out;
}

// Thrown when the answer source fails mid-run; carries what was learned so far.
class CoverageAborted : public std::runtime_error {
public:
    CoverageAborted(const std::string& what, CoverageVerdict partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const CoverageVerdict& partial() const { return partial_; }

private:
    CoverageVerdict partial_;
};

} // namespace coverage
