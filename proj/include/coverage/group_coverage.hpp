#pragma once

// Divide-and-conquer coverage check for one (super-)group using set queries.
//
// The working order is cut into consecutive root ranges of at most n items.
// Nodes are processed breadth-first.  A "no" prunes the node; a "no" on a
// left child proves its right sibling contains a member, so the sibling is
// taken out of the queue and handled as a free "yes".  cnt counts disjoint
// ranges known to hold a member and is exact once the queue drains.

#include "coverage/answer_source.hpp"
#include "coverage/errors.hpp"
#include "coverage/query.hpp"
#include "coverage/verdict.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coverage {

struct SearchNode {
    std::size_t b_index = 0;  // inclusive bounds into the working order
    std::size_t e_index = 0;
    std::optional<std::size_t> parent;
    std::optional<std::size_t> left;
    std::optional<std::size_t> right;
    bool checked = false;  // some child answered (or was inferred) yes
    QueryTask task;

    std::size_t size() const { return e_index - b_index + 1; }
};

struct EngineOptions {
    std::string phase = "group-coverage";
    // Called after every cnt update with the current lower bound.
    std::function<void(std::size_t)> on_count;
};

inline CoverageVerdict group_coverage(std::span<const std::size_t> order, std::size_t n, std::size_t tau,
                                      std::vector<Group> groups, AnswerSource& source,
                                      const EngineOptions& opts = {}) {
    if (n == 0) throw std::invalid_argument("set-size bound n must be at least 1");
    if (tau == 0) throw std::invalid_argument("coverage threshold must be at least 1");
    if (groups.empty()) throw std::invalid_argument("group_coverage needs a target group");

    CoverageVerdict v;
    v.groups = std::move(groups);
    const Target target = target_of(v.groups);
    const auto assignments_before = source.counters().assignments_issued;

    std::vector<SearchNode> nodes;
    std::deque<std::size_t> queue;

    auto enqueue = [&](std::size_t b, std::size_t e, std::optional<std::size_t> parent) {
        SearchNode node;
        node.b_index = b;
        node.e_index = e;
        node.parent = parent;
        node.task = source.make_set_task({order.begin() + static_cast<std::ptrdiff_t>(b),
                                          order.begin() + static_cast<std::ptrdiff_t>(e) + 1},
                                         target, opts.phase);
        nodes.push_back(std::move(node));
        const auto idx = nodes.size() - 1;
        queue.push_back(idx);
        source.publish(nodes[idx].task);
        return idx;
    };

    auto finish = [&](bool covered) {
        v.covered = covered;
        v.assignments_issued = source.counters().assignments_issued - assignments_before;
        for (auto idx : queue) source.cancel(nodes[idx].task, CancelReason::Unneeded);
        queue.clear();
        return v;
    };

    auto bump = [&] {
        ++v.cnt;
        if (opts.on_count) opts.on_count(v.cnt);
    };

    for (std::size_t b = 0; b < order.size(); b += n)
        enqueue(b, std::min(b + n, order.size()) - 1, std::nullopt);

    while (!queue.empty()) {
        std::size_t t = queue.front();
        queue.pop_front();

        bool ans = false;
        try {
            ans = source.ask_set(nodes[t].task);
        } catch (const AnswerSourceError& e) {
            v.assignments_issued = source.counters().assignments_issued - assignments_before;
            throw CoverageAborted(e.what(), v);
        }
        ++v.tasks_issued;
        v.trace.push_back({nodes[t].task.id, ans, false});

        if (!nodes[t].parent) {
            if (!ans) continue;
            bump();
        } else {
            const std::size_t parent = *nodes[t].parent;
            if (!ans) {
                if (nodes[parent].left != t) continue;
                // FIFO keeps the right sibling directly behind its left sibling.
                const std::size_t sibling = *nodes[parent].right;
                if (queue.empty() || queue.front() != sibling)
                    throw std::logic_error("right sibling is not at the queue front");
                queue.pop_front();
                source.cancel(nodes[sibling].task, CancelReason::Inferred);
                v.trace.push_back({nodes[sibling].task.id, true, true});
                t = sibling;
            }
            if (nodes[parent].checked) bump();
            else nodes[parent].checked = true;
        }

        if (v.cnt >= tau) return finish(true);

        const auto i = nodes[t].b_index;
        const auto j = nodes[t].e_index;
        if (j > i) {
            const auto mid = i + (j - i) / 2;
            const auto l = enqueue(i, mid, t);
            const auto r = enqueue(mid + 1, j, t);
            nodes[t].left = l;
            nodes[t].right = r;
        }
    }
    return finish(false);
}

inline CoverageVerdict group_coverage(std::span<const std::size_t> order, std::size_t n, std::size_t tau,
                                      const Group& g, AnswerSource& source, const EngineOptions& opts = {}) {
    return group_coverage(order, n, tau, std::vector<Group>{g}, source, opts);
}

// Attributes referenced by any of the groups, ascending.
inline std::vector<std::size_t> referenced_attributes(std::span<const Group> groups) {
    std::vector<std::size_t> out;
    for (const auto& g : groups)
        for (auto a : g.pattern.specified_slots())
            if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    std::sort(out.begin(), out.end());
    return out;
}

// Baseline: one point query per item, in order, until tau matches.
inline CoverageVerdict base_coverage(std::span<const std::size_t> order, std::size_t tau, std::vector<Group> groups,
                                     AnswerSource& source, const std::string& phase = "base-coverage") {
    if (tau == 0) throw std::invalid_argument("coverage threshold must be at least 1");
    if (groups.empty()) throw std::invalid_argument("base_coverage needs a target group");
    CoverageVerdict v;
    v.groups = std::move(groups);
    const auto attrs = referenced_attributes(v.groups);
    const auto target = target_of(v.groups);
    const auto assignments_before = source.counters().assignments_issued;
    for (auto item : order) {
        auto task = source.make_point_task(item, attrs, phase);
        Labels labels;
        try {
            labels = source.ask_point(task);
        } catch (const AnswerSourceError& e) {
            v.assignments_issued = source.counters().assignments_issued - assignments_before;
            throw CoverageAborted(e.what(), v);
        }
        ++v.tasks_issued;
        const bool hit = target.contains(labels);
        v.trace.push_back({task.id, hit, false});
        if (hit && ++v.cnt >= tau) {
            v.covered = true;
            break;
        }
    }
    v.assignments_issued = source.counters().assignments_issued - assignments_before;
    return v;
}

inline CoverageVerdict base_coverage(std::span<const std::size_t> order, std::size_t tau, const Group& g,
                                     AnswerSource& source) {
    return base_coverage(order, tau, std::vector<Group>{g}, source);
}

// Reported task upper bound floor(N/n) + tau*log10(n), rounded up.  Base 10
// is the base that reproduces the published bound (115 for 1522/50/50).
inline std::size_t reported_upper_bound(std::size_t N, std::size_t n, std::size_t tau) {
    if (N == 0 || n == 0 || tau == 0) throw std::invalid_argument("reported_upper_bound needs N, n, tau >= 1");
    const double value = static_cast<double>(N / n) + static_cast<double>(tau) * std::log10(static_cast<double>(n));
    return static_cast<std::size_t>(std::ceil(value - 1e-9));
}

// Bound used by the property tests: ceil(N/n) + 2*tau*(ceil(log2 n) + 1).
inline std::size_t task_bound(std::size_t N, std::size_t n, std::size_t tau) {
    std::size_t log2n = 0;
    while ((std::size_t{1} << log2n) < n) ++log2n;
    return (N + n - 1) / n + 2 * tau * (log2n + 1);
}

} // namespace coverage
