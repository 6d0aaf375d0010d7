#pragma once

// Answer-source contract and the in-process implementations: a simulated
// crowd with an independent per-worker error model, transcript replay, and a
// recording decorator that produces transcripts.

#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/io.hpp"
#include "coverage/query.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace coverage {

struct CostCounters {
    std::size_t tasks_issued = 0;
    std::size_t assignments_issued = 0;
};

class AnswerSource {
public:
    explicit AnswerSource(unsigned assignments_per_task = 1) : k_(assignments_per_task) {
        if (k_ == 0) throw ConfigError("assignments per task must be positive");
    }
    virtual ~AnswerSource() = default;
    AnswerSource(const AnswerSource&) = delete;
    AnswerSource& operator=(const AnswerSource&) = delete;

    virtual bool supports_set() const { return true; }
    virtual bool supports_point() const { return true; }

    unsigned assignments_per_task() const { return k_; }

    QueryTask make_set_task(std::vector<std::size_t> items, Target target, std::string phase = {}) {
        QueryTask t = stamp(TaskKind::Set, std::move(phase));
        t.items = std::move(items);
        t.target = std::move(target);
        return t;
    }

    QueryTask make_point_task(std::size_t item, std::vector<std::size_t> attributes, std::string phase = {}) {
        QueryTask t = stamp(TaskKind::Point, std::move(phase));
        t.items = {item};
        t.attributes = std::move(attributes);
        return t;
    }

    bool ask_set(const QueryTask& t) {
        if (t.kind != TaskKind::Set) throw AnswerSourceError("task " + t.id + " is not a set query");
        if (!supports_set()) throw AnswerSourceError("answer source does not support set queries");
        claim(t);
        SetOutcome out;
        try {
            out = resolve_set(t);
        } catch (...) {
            release(t);
            throw;
        }
        charge(out.assignments);
        return out.answer;
    }

    Labels ask_point(const QueryTask& t) {
        if (t.kind != TaskKind::Point) throw AnswerSourceError("task " + t.id + " is not a point query");
        if (!supports_point()) throw AnswerSourceError("answer source does not support point queries");
        claim(t);
        PointOutcome out;
        try {
            out = resolve_point(t);
        } catch (...) {
            release(t);
            throw;
        }
        charge(out.assignments);
        return std::move(out.labels);
    }

    // Frontier hints: a task that will (probably) be asked soon, or one that
    // is no longer needed.  In-process sources ignore both.
    virtual void publish(const QueryTask&) {}
    virtual void cancel(const QueryTask&, CancelReason) {}

    CostCounters counters() const {
        std::lock_guard lock(mu_);
        return counters_;
    }

protected:
    struct SetOutcome {
        bool answer = false;
        std::size_t assignments = 0;
    };
    struct PointOutcome {
        Labels labels;
        std::size_t assignments = 0;
    };

    virtual SetOutcome resolve_set(const QueryTask& t) = 0;
    virtual PointOutcome resolve_point(const QueryTask& t) = 0;

private:
    QueryTask stamp(TaskKind kind, std::string phase) {
        std::lock_guard lock(mu_);
        QueryTask t;
        t.seq = next_seq_++;
        t.id = "t" + std::to_string(t.seq);
        t.kind = kind;
        t.required_assignments = k_;
        t.phase = std::move(phase);
        return t;
    }

    void claim(const QueryTask& t) {
        std::lock_guard lock(mu_);
        if (!answered_.insert(t.seq).second) throw AnswerSourceError("task " + t.id + " was already answered");
    }

    void release(const QueryTask& t) {
        std::lock_guard lock(mu_);
        answered_.erase(t.seq);
    }

    void charge(std::size_t assignments) {
        std::lock_guard lock(mu_);
        ++counters_.tasks_issued;
        counters_.assignments_issued += assignments;
    }

    unsigned k_;
    mutable std::mutex mu_;
    std::uint64_t next_seq_ = 0;
    std::unordered_set<std::uint64_t> answered_;
    CostCounters counters_;
};

struct CrowdConfig {
    double error_rate = 0.0136;  // observed per-answer error on the live platform
    unsigned assignments = 3;    // k, odd
    std::uint64_t seed = 0;
};

// Simulated workers answering from ground truth.  Each worker's answer is a
// pure function of (seed, task seq, worker index), so answers do not depend
// on request order or on which thread asks.
class SimulatedCrowd : public AnswerSource {
public:
    SimulatedCrowd(const ItemCollection& truth, CrowdConfig cfg = {})
        : AnswerSource(cfg.assignments), truth_(truth), cfg_(cfg) {
        if (cfg.error_rate < 0.0 || cfg.error_rate > 1.0) throw ConfigError("error rate must be in [0, 1]");
        if (cfg.assignments % 2 == 0) throw ConfigError("assignments per task must be odd");
    }

    const CrowdConfig& config() const { return cfg_; }

    bool truth_answer(const QueryTask& t) const {
        // negated: is there an item outside the target?
        for (auto i : t.items) {
            if (i >= truth_.size()) throw AnswerSourceError("task " + t.id + " references an unknown item");
            if (t.target.contains(truth_.truth(i)) != t.target.negated) return true;
        }
        return false;
    }

    // The answer virtual worker `worker` gives to set task `t`.
    bool worker_set_answer(const QueryTask& t, std::size_t worker) const {
        const bool truth = truth_answer(t);
        if (cfg_.error_rate == 0.0) return truth;
        auto rng = worker_rng(t.seq, worker);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return u(rng) < cfg_.error_rate ? !truth : truth;
    }

    // Point answer of worker `worker`: per attribute, the true value with
    // probability 1-p, else a uniformly chosen wrong value.
    Labels worker_point_answer(const QueryTask& t, std::size_t worker) const {
        const std::size_t item = t.items.at(0);
        if (item >= truth_.size()) throw AnswerSourceError("task " + t.id + " references an unknown item");
        const auto& truth = truth_.truth(item);
        Labels out(truth_.schema().size(), kUnspecified);
        auto rng = worker_rng(t.seq, worker);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto a : t.attributes) {
            const auto sigma = truth_.schema().cardinality(a);
            const double flip = u(rng);
            if (cfg_.error_rate > 0.0 && flip < cfg_.error_rate) {
                std::uniform_int_distribution<std::size_t> wrong(0, sigma - 2);
                auto v = static_cast<ValueIndex>(wrong(rng));
                if (v >= truth[a]) ++v;
                out[a] = v;
            } else {
                out[a] = truth[a];
            }
        }
        return out;
    }

protected:
    SetOutcome resolve_set(const QueryTask& t) override {
        const std::size_t k = cfg_.assignments;
        if (cfg_.error_rate == 0.0) return {truth_answer(t), k};
        std::vector<bool> votes;
        for (std::size_t w = 0; w < k; ++w) votes.push_back(worker_set_answer(t, w));
        std::size_t yes = 0;
        for (bool v : votes) yes += v;
        return {2 * yes > k, k};
    }

    PointOutcome resolve_point(const QueryTask& t) override {
        std::vector<Labels> votes;
        std::size_t w = 0;
        for (; w < cfg_.assignments; ++w) votes.push_back(worker_point_answer(t, w));
        // extra workers until every asked attribute has a unique plurality
        while (true) {
            if (auto agg = plurality(votes, t.attributes, truth_.schema())) return {std::move(*agg), votes.size()};
            votes.push_back(worker_point_answer(t, w++));
        }
    }

private:
    std::mt19937_64 worker_rng(std::uint64_t seq, std::size_t worker) const {
        std::seed_seq ss{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                         static_cast<std::uint32_t>(seq), static_cast<std::uint32_t>(seq >> 32),
                         static_cast<std::uint32_t>(worker)};
        return std::mt19937_64(ss);
    }

    const ItemCollection& truth_;
    CrowdConfig cfg_;
};

inline json aggregate_to_json(const AttributeSchema& schema, const Aggregate& a) {
    if (const bool* yes = std::get_if<bool>(&a)) return *yes ? "yes" : "no";
    return labels_to_json(schema, std::get<Labels>(a));
}

inline Aggregate aggregate_from_json(const AttributeSchema& schema, TaskKind kind, const json& j) {
    if (kind == TaskKind::Set) {
        if (j.is_boolean()) return j.get<bool>();
        if (j.is_string()) {
            const auto s = j.get<std::string>();
            if (s == "yes" || s == "true") return true;
            if (s == "no" || s == "false") return false;
        }
        throw ConfigError("set answer must be yes/no, got " + j.dump());
    }
    return labels_from_json(schema, j);
}

// fingerprint -> aggregate, as stored in a JSONL transcript.
using Transcript = std::map<std::string, json>;

inline Transcript parse_transcript(const std::string& jsonl) {
    Transcript out;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto j = parse_json(line, "transcript line " + std::to_string(lineno));
        if (!j.contains("fingerprint") || !j.contains("answer"))
            throw ConfigError("transcript line " + std::to_string(lineno) + " needs fingerprint and answer");
        out[j["fingerprint"].get<std::string>()] = j["answer"];
    }
    return out;
}

// Replays recorded aggregates; a question missing from the transcript is an
// answer-source failure.
class TranscriptSource : public AnswerSource {
public:
    TranscriptSource(const ItemCollection& c, Transcript t, unsigned k = 1)
        : AnswerSource(k), collection_(c), transcript_(std::move(t)) {}

protected:
    SetOutcome resolve_set(const QueryTask& t) override {
        return {std::get<bool>(lookup(t)), t.required_assignments};
    }
    PointOutcome resolve_point(const QueryTask& t) override {
        return {std::get<Labels>(lookup(t)), t.required_assignments};
    }

private:
    Aggregate lookup(const QueryTask& t) const {
        const auto fp = fingerprint(t, collection_);
        auto it = transcript_.find(fp);
        if (it == transcript_.end()) throw AnswerSourceError("transcript has no answer for " + fp);
        return aggregate_from_json(collection_.schema(), t.kind, it->second);
    }

    const ItemCollection& collection_;
    Transcript transcript_;
};

// Forwards to an inner source and records every aggregate as a transcript
// line.  Tasks are minted here; the inner source only resolves them.
class RecordingSource : public AnswerSource {
public:
    RecordingSource(AnswerSource& inner, const ItemCollection& c)
        : AnswerSource(inner.assignments_per_task()), inner_(inner), collection_(c) {}

    bool supports_set() const override { return inner_.supports_set(); }
    bool supports_point() const override { return inner_.supports_point(); }
    void publish(const QueryTask& t) override { inner_.publish(t); }
    void cancel(const QueryTask& t, CancelReason r) override { inner_.cancel(t, r); }

    const std::string& transcript_jsonl() const { return lines_; }

protected:
    SetOutcome resolve_set(const QueryTask& t) override {
        const auto before = inner_.counters().assignments_issued;
        const bool ans = inner_.ask_set(t);
        record(t, ans);
        return {ans, inner_.counters().assignments_issued - before};
    }
    PointOutcome resolve_point(const QueryTask& t) override {
        const auto before = inner_.counters().assignments_issued;
        auto labels = inner_.ask_point(t);
        record(t, labels);
        return {std::move(labels), inner_.counters().assignments_issued - before};
    }

private:
    void record(const QueryTask& t, const Aggregate& a) {
        json line{{"fingerprint", fingerprint(t, collection_)}, {"answer", aggregate_to_json(collection_.schema(), a)}};
        std::lock_guard lock(mu_);
        lines_ += line.dump();
        lines_ += '\n';
    }

    AnswerSource& inner_;
    const ItemCollection& collection_;
    std::mutex mu_;
    std::string lines_;
};

} // namespace coverage
