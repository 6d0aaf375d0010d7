#pragma once

// Coverage with a classifier's predictions: probe the predicted positives,
// strip false positives by negated set queries (Partition) or point queries
// (Label), then look for the missing instances among the predicted negatives.

#include "coverage/answer_source.hpp"
#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/group_coverage.hpp"
#include "coverage/io.hpp"
#include "coverage/schema.hpp"
#include "coverage/verdict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coverage {

struct PredictionSet {
    Group target;
    std::vector<std::size_t> predicted;   // G, collection order
    std::vector<std::size_t> complement;  // everything else, collection order
};

// Items whose predicted labels match the target.  A prediction that leaves a
// referenced attribute unspecified counts as "not predicted".
inline PredictionSet make_predictions(const ItemCollection& c, const Group& g) {
    PredictionSet out{g, {}, {}};
    for (std::size_t i = 0; i < c.size(); ++i) {
        bool hit = false;
        if (const auto& pred = c[i].predicted) {
            hit = true;
            for (auto a : g.pattern.specified_slots())
                if ((*pred)[a] != g.pattern.slots()[a]) hit = false;
        }
        (hit ? out.predicted : out.complement).push_back(i);
    }
    return out;
}

struct ProbeResult {
    double precision = 0.0;
    std::map<std::size_t, bool> labels;  // probed item -> is a member
    std::size_t tasks_issued = 0;

    std::size_t positives() const {
        return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](auto& e) { return e.second; }));
    }
};

inline ProbeResult probe_precision(std::span<const std::size_t> G, double s, const Group& g, AnswerSource& source,
                                   std::uint64_t seed) {
    if (G.empty()) throw std::invalid_argument("cannot probe an empty prediction set");
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("probe fraction must be in (0, 1]");
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(s * static_cast<double>(G.size()) - 1e-9)));
    std::vector<std::size_t> chosen;
    std::mt19937_64 rng(seed);
    std::sample(G.begin(), G.end(), std::back_inserter(chosen), std::min(k, G.size()), rng);

    const auto attrs = g.pattern.specified_slots();
    const Target target = target_of(g);
    ProbeResult out;
    // the whole probe is known up front, so publish it before asking
    std::vector<QueryTask> tasks;
    for (auto item : chosen) {
        tasks.push_back(source.make_point_task(item, attrs, "precision-probe"));
        source.publish(tasks.back());
    }
    for (const auto& t : tasks) {
        out.labels[t.items.front()] = target.contains(source.ask_point(t));
        ++out.tasks_issued;
    }
    out.precision = static_cast<double>(out.positives()) / static_cast<double>(out.labels.size());
    return out;
}

struct VerifyResult {
    std::vector<std::size_t> verified;  // confirmed members, ascending
    std::vector<std::size_t> rejected;  // confirmed false positives
    std::size_t tasks_issued = 0;
    std::vector<TraceEntry> trace;
};

// BFS over G with "any item NOT in g?" queries.  A "no" verifies the whole
// range; a "yes" on one item rejects it.  A "no" on a left child proves the
// right sibling holds a non-member, so that answer is inferred.
inline VerifyResult partition_verify(std::span<const std::size_t> G, std::size_t n, const Group& g,
                                     AnswerSource& source) {
    if (n == 0) throw std::invalid_argument("set-size bound n must be at least 1");
    struct Node {
        std::size_t b, e;
        std::optional<std::size_t> parent;
        bool is_left = false;
        QueryTask task;
    };
    const Target target = target_of(g, /*negated=*/true);
    std::vector<Node> nodes;
    std::deque<std::size_t> queue;
    auto enqueue = [&](std::size_t b, std::size_t e, std::optional<std::size_t> parent, bool is_left) {
        auto task = source.make_set_task({G.begin() + static_cast<std::ptrdiff_t>(b),
                                          G.begin() + static_cast<std::ptrdiff_t>(e) + 1},
                                         target, "partition");
        nodes.push_back(Node{b, e, parent, is_left, std::move(task)});
        queue.push_back(nodes.size() - 1);
        source.publish(nodes.back().task);
    };

    VerifyResult out;
    for (std::size_t b = 0; b < G.size(); b += n) enqueue(b, std::min(b + n, G.size()) - 1, std::nullopt, false);

    while (!queue.empty()) {
        auto t = queue.front();
        queue.pop_front();
        const bool impure = source.ask_set(nodes[t].task);
        ++out.tasks_issued;
        out.trace.push_back({nodes[t].task.id, impure, false});
        if (!impure) {
            for (auto i = nodes[t].b; i <= nodes[t].e; ++i) out.verified.push_back(G[i]);
            if (!nodes[t].parent || !nodes[t].is_left) continue;
            const auto sibling = t + 1;
            if (queue.empty() || queue.front() != sibling) throw std::logic_error("right sibling is not at the queue front");
            queue.pop_front();
            source.cancel(nodes[sibling].task, CancelReason::Inferred);
            out.trace.push_back({nodes[sibling].task.id, true, true});
            t = sibling;
        }
        const auto b = nodes[t].b, e = nodes[t].e;
        if (b == e) {
            out.rejected.push_back(G[b]);
            continue;
        }
        const auto mid = b + (e - b) / 2;
        enqueue(b, mid, t, true);
        enqueue(mid + 1, e, t, false);
    }
    std::sort(out.verified.begin(), out.verified.end());
    std::sort(out.rejected.begin(), out.rejected.end());
    return out;
}

// Point-queries G in order, reusing known labels, until tau members are verified.
inline VerifyResult label_verify(std::span<const std::size_t> G, std::size_t tau, const Group& g, AnswerSource& source,
                                 const std::map<std::size_t, bool>& reuse = {}) {
    if (tau == 0) throw std::invalid_argument("coverage threshold must be at least 1");
    const auto attrs = g.pattern.specified_slots();
    const Target target = target_of(g);
    VerifyResult out;
    for (const auto& [item, member] : reuse)
        if (member) out.verified.push_back(item);
    for (auto item : G) {
        if (out.verified.size() >= tau) break;
        bool member;
        if (auto it = reuse.find(item); it != reuse.end()) {
            if (it->second) continue;  // already counted
            member = false;
        } else {
            auto task = source.make_point_task(item, attrs, "label");
            member = target.contains(source.ask_point(task));
            ++out.tasks_issued;
            out.trace.push_back({task.id, member, false});
        }
        (member ? out.verified : out.rejected).push_back(item);
    }
    std::sort(out.verified.begin(), out.verified.end());
    std::sort(out.rejected.begin(), out.rejected.end());
    return out;
}

enum class Strategy { Partition, Label };

inline const char* to_string(Strategy s) { return s == Strategy::Partition ? "partition" : "label"; }

// A probe with at least 25% false positives sends the run to Label.
inline Strategy choose_strategy(const ProbeResult& probe, double threshold = 0.25) {
    return 1.0 - probe.precision >= threshold ? Strategy::Label : Strategy::Partition;
}

struct ClassifierOptions {
    double probe_fraction = 0.1;
    double fp_threshold = 0.25;
    std::uint64_t seed = 0;
};

struct ClassifierResult {
    CoverageVerdict verdict;
    std::optional<Strategy> strategy;  // nullopt when G was empty
    double probe_precision = 0.0;
    std::size_t verified = 0;
    std::size_t probe_tasks = 0;
    std::size_t verify_tasks = 0;
    std::size_t sweep_tasks = 0;

    std::size_t total_tasks() const { return probe_tasks + verify_tasks + sweep_tasks; }
};

inline ClassifierResult classifier_coverage(const ItemCollection& collection, const PredictionSet& predictions,
                                            std::size_t n, std::size_t tau, AnswerSource& source,
                                            const ClassifierOptions& opts = {}) {
    if (tau == 0) throw std::invalid_argument("coverage threshold must be at least 1");
    if (predictions.predicted.size() + predictions.complement.size() != collection.size())
        throw ConfigError("predictions must cover the collection");
    const auto& g = predictions.target;
    const auto assignments_before = source.counters().assignments_issued;

    ClassifierResult res;
    std::vector<TraceEntry> trace;
    std::size_t verified = 0;
    if (!predictions.predicted.empty()) {
        auto probe = probe_precision(predictions.predicted, opts.probe_fraction, g, source, opts.seed);
        res.probe_tasks = probe.tasks_issued;
        res.probe_precision = probe.precision;
        res.strategy = choose_strategy(probe, opts.fp_threshold);

        VerifyResult vr;
        if (*res.strategy == Strategy::Partition) {
            std::vector<std::size_t> rest;
            for (auto i : predictions.predicted)
                if (!probe.labels.count(i)) rest.push_back(i);
            vr = partition_verify(rest, n, g, source);
            verified = vr.verified.size() + probe.positives();
        } else {
            vr = label_verify(predictions.predicted, tau, g, source, probe.labels);
            verified = vr.verified.size();
        }
        res.verify_tasks = vr.tasks_issued;
        trace = std::move(vr.trace);
    }
    res.verified = verified;

    CoverageVerdict& v = res.verdict;
    if (verified >= tau) {
        v.groups = {g};
        v.covered = true;
        v.cnt = tau;
    } else {
        EngineOptions eo;
        eo.phase = "complement-sweep";
        v = group_coverage(predictions.complement, n, tau - verified, g, source, eo);
        res.sweep_tasks = v.tasks_issued;
        v.cnt = v.covered ? tau : v.cnt + verified;
        trace.insert(trace.end(), v.trace.begin(), v.trace.end());
    }
    v.trace = std::move(trace);
    v.tasks_issued = res.total_tasks();
    v.assignments_issued = source.counters().assignments_issued - assignments_before;
    return res;
}

inline ClassifierResult classifier_coverage(const ItemCollection& collection, std::size_t n, std::size_t tau,
                                            const Group& g, AnswerSource& source,
                                            const ClassifierOptions& opts = {}) {
    return classifier_coverage(collection, make_predictions(collection, g), n, tau, source, opts);
}

inline json classifier_result_to_json(const ClassifierResult& r) {
    auto out = verdict_to_json(r.verdict);
    out["strategy"] = r.strategy ? json(to_string(*r.strategy)) : json(nullptr);
    out["probe_precision"] = r.probe_precision;
    out["verified"] = r.verified;
    out["probe_tasks"] = r.probe_tasks;
    out["verify_tasks"] = r.verify_tasks;
    out["sweep_tasks"] = r.sweep_tasks;
    return out;
}

} // namespace coverage
