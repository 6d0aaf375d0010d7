#pragma once

// Live audit sessions answered by human workers.
//
// A session's durable record is its event log (JSONL, append-only):
//   {"seq": 0, "ts": <ms>, "type": "created", "payload": {"session_id", "config"}}
//   {"seq": 1, "ts": <ms>, "type": "assigned", "payload": {"task_id", "worker_id", "answer", "ignored"}}
//   ... "resolved" {task_id, answer, assignments}, "canceled" {task_id, reason},
//   "verdict" {the engine's result}
// Only "created" and "assigned" carry information; the other events are
// consequences and are regenerated on replay.
//
// Engine state is never stored.  When the task the engine is blocked on
// resolves, the engine runs again from the start against the resolved
// answers; it stops at the first task nobody has answered yet, and the tasks
// it has queued at that point are the pending board.  Task sequence numbers are minted in the same order
// on every run, so a task keeps its id across runs.

#include "coverage/aggregation.hpp"
#include "coverage/answer_source.hpp"
#include "coverage/classifier.hpp"
#include "coverage/errors.hpp"
#include "coverage/group_coverage.hpp"
#include "coverage/io.hpp"
#include "coverage/lattice.hpp"
#include "coverage/query.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

namespace coverage {

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SessionConfig {
    std::string algorithm = "group";  // group | base | multiple | intersectional | classifier
    std::string manifest;
    std::vector<std::string> groups;  // patterns; multiple defaults to every value of `attribute`
    std::optional<std::string> attribute;
    std::size_t n = 50;
    std::size_t tau = 50;
    unsigned k = 3;
    double c = 2.0;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> shuffle_seed;  // natural order when absent
    bool multi = false;
    double probe_fraction = 0.1;
    double fp_threshold = 0.25;
    std::int64_t reassign_timeout_ms = 0;  // 0: off
};

inline json session_config_to_json(const SessionConfig& c) {
    json j{{"algorithm", c.algorithm}, {"manifest", c.manifest}, {"groups", c.groups},
           {"n", c.n}, {"tau", c.tau}, {"k", c.k}, {"c", c.c}, {"seed", c.seed}, {"multi", c.multi},
           {"probe_fraction", c.probe_fraction}, {"fp_threshold", c.fp_threshold},
           {"reassign_timeout_ms", c.reassign_timeout_ms}};
    if (c.attribute) j["attribute"] = *c.attribute;
    if (c.shuffle_seed) j["shuffle_seed"] = *c.shuffle_seed;
    return j;
}

inline SessionConfig session_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("session config must be a JSON object");
    SessionConfig c;
    try {
        c.algorithm = j.value("algorithm", c.algorithm);
        c.manifest = j.value("manifest", c.manifest);
        if (j.contains("group")) {
            if (j["group"].is_array()) c.groups = j["group"].get<std::vector<std::string>>();
            else c.groups = {j["group"].get<std::string>()};
        }
        if (j.contains("groups")) c.groups = j["groups"].get<std::vector<std::string>>();
        if (j.contains("attribute")) c.attribute = j["attribute"].get<std::string>();
        c.n = j.value("n", c.n);
        c.tau = j.value("tau", c.tau);
        c.k = j.value("k", c.k);
        c.c = j.value("c", c.c);
        c.seed = j.value("seed", c.seed);
        if (j.contains("shuffle_seed") && !j["shuffle_seed"].is_null())
            c.shuffle_seed = j["shuffle_seed"].get<std::uint64_t>();
        c.multi = j.value("multi", c.multi);
        c.probe_fraction = j.value("probe_fraction", c.probe_fraction);
        c.fp_threshold = j.value("fp_threshold", c.fp_threshold);
        c.reassign_timeout_ms = j.value("reassign_timeout_ms", c.reassign_timeout_ms);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("session config: ") + e.what());
    }
    static const std::set<std::string> known{"group", "base", "multiple", "intersectional", "classifier"};
    if (!known.count(c.algorithm)) throw ConfigError("unknown algorithm '" + c.algorithm + "'");
    if (c.manifest.empty()) throw ConfigError("session config needs a manifest");
    if (c.n == 0 || c.tau == 0) throw ConfigError("n and tau must be at least 1");
    if (c.k == 0) throw ConfigError("k must be at least 1");
    if (c.algorithm != "base" && c.k % 2 == 0) throw ConfigError("k must be odd for set queries");
    if (c.reassign_timeout_ms < 0) throw ConfigError("reassign_timeout_ms must be non-negative");
    if ((c.algorithm == "group" || c.algorithm == "base") && c.groups.empty())
        throw ConfigError(c.algorithm + " needs a group");
    if (c.algorithm == "classifier" && c.groups.size() != 1) throw ConfigError("classifier needs exactly one group");
    return c;
}

inline std::vector<Group> config_groups(const SessionConfig& cfg, const AttributeSchema& schema) {
    std::vector<Group> out;
    for (const auto& g : cfg.groups) out.push_back(make_group(schema, parse_pattern(schema, g)));
    if (out.empty() && cfg.algorithm == "multiple") {
        std::size_t attr = 0;
        if (cfg.attribute) {
            auto a = schema.find_attribute(*cfg.attribute);
            if (!a) throw ConfigError("unknown attribute '" + *cfg.attribute + "'");
            attr = *a;
        }
        out = groups_of_attribute(schema, attr);
    }
    return out;
}

// Runs the configured engine to completion.  Every result carries
// covered, cnt, tasks and assignments.
inline json run_engine(const SessionConfig& cfg, const ItemCollection& c, AnswerSource& source) {
    const auto& schema = c.schema();
    auto order = c.natural_order();
    if (cfg.shuffle_seed) {
        std::mt19937_64 rng(*cfg.shuffle_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    auto groups = config_groups(cfg, schema);
    MultipleOptions mo;
    mo.c = cfg.c;
    mo.seed = cfg.seed;
    mo.multi = cfg.multi;

    if (cfg.algorithm == "group") return verdict_to_json(group_coverage(order, cfg.n, cfg.tau, groups, source));
    if (cfg.algorithm == "base") return verdict_to_json(base_coverage(order, cfg.tau, groups, source));
    if (cfg.algorithm == "multiple")
        return multiple_result_to_json(multiple_coverage(c, order, cfg.n, cfg.tau, groups, source, mo));
    if (cfg.algorithm == "intersectional")
        return intersectional_result_to_json(intersectional_coverage(c, order, cfg.n, cfg.tau, source, mo), schema);
    if (cfg.algorithm == "classifier") {
        ClassifierOptions co;
        co.probe_fraction = cfg.probe_fraction;
        co.fp_threshold = cfg.fp_threshold;
        co.seed = cfg.seed;
        return classifier_result_to_json(
            classifier_coverage(c, make_predictions(c, groups.at(0)), cfg.n, cfg.tau, source, co));
    }
    throw ConfigError("unknown algorithm '" + cfg.algorithm + "'");
}

// Thrown by BoardSource when the engine reaches a task without an answer.
struct AwaitingAnswer : std::exception {
    std::uint64_t seq;
    explicit AwaitingAnswer(std::uint64_t s) : seq(s) {}
    const char* what() const noexcept override { return "task awaits an answer"; }
};

struct Resolution {
    Aggregate answer;
    std::size_t assignments = 0;
    std::string fingerprint;
};

// Answers from the resolved part of the board; records what the engine
// has queued, withdrawn and asked.
class BoardSource : public AnswerSource {
public:
    BoardSource(const ItemCollection& c, unsigned k, const std::map<std::uint64_t, Resolution>& resolved)
        : AnswerSource(k), collection_(c), resolved_(resolved) {}

    void publish(const QueryTask& t) override { frontier_[t.seq] = t; }
    void cancel(const QueryTask& t, CancelReason r) override {
        frontier_.erase(t.seq);
        if (r == CancelReason::Inferred) inferred_.insert(t.seq);
    }

    const std::map<std::uint64_t, QueryTask>& frontier() const { return frontier_; }
    bool inferred(std::uint64_t seq) const { return inferred_.count(seq) > 0; }
    const std::set<std::uint64_t>& asked() const { return asked_; }

protected:
    SetOutcome resolve_set(const QueryTask& t) override {
        const auto& r = lookup(t);
        return {std::get<bool>(r.answer), r.assignments};
    }
    PointOutcome resolve_point(const QueryTask& t) override {
        const auto& r = lookup(t);
        return {std::get<Labels>(r.answer), r.assignments};
    }

private:
    const Resolution& lookup(const QueryTask& t) {
        auto it = resolved_.find(t.seq);
        if (it == resolved_.end()) {
            frontier_[t.seq] = t;
            throw AwaitingAnswer(t.seq);
        }
        if (it->second.fingerprint != fingerprint(t, collection_))
            throw std::logic_error("engine re-run asked a different question for " + t.id);
        frontier_.erase(t.seq);
        asked_.insert(t.seq);
        return it->second;
    }

    const ItemCollection& collection_;
    const std::map<std::uint64_t, Resolution>& resolved_;
    std::map<std::uint64_t, QueryTask> frontier_;
    std::set<std::uint64_t> inferred_;
    std::set<std::uint64_t> asked_;
};

enum class TaskStatus { Pending, Answering, Resolved, Canceled };

inline const char* to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::Pending: return "pending";
        case TaskStatus::Answering: return "answering";
        case TaskStatus::Resolved: return "resolved";
        case TaskStatus::Canceled: return "canceled";
    }
    return "?";
}

struct BoardTask {
    QueryTask task;
    TaskStatus status = TaskStatus::Pending;
    std::size_t required = 1;  // grows past k when a point vote is tied
    std::vector<std::string> workers;
    std::vector<Aggregate> votes;
    std::optional<Aggregate> answer;
    bool inferred = false;

    bool open() const { return status == TaskStatus::Pending || status == TaskStatus::Answering; }
    std::size_t remaining() const { return open() ? required - std::min(required, votes.size()) : 0; }
    bool answered_by(const std::string& w) const {
        return std::find(workers.begin(), workers.end(), w) != workers.end();
    }
};

struct SessionSnapshot {
    std::string id;
    SessionConfig config;
    std::map<std::uint64_t, BoardTask> tasks;
    std::set<std::uint64_t> used;  // resolved tasks the engine consumed
    bool done = false;
    json verdict;
    std::size_t events = 0;
    std::size_t assignments = 0;
};

enum class SubmitStatus { Answering, Resolved, Canceled, Rejected };

inline const char* to_string(SubmitStatus s) {
    switch (s) {
        case SubmitStatus::Answering: return "answering";
        case SubmitStatus::Resolved: return "resolved";
        case SubmitStatus::Canceled: return "canceled";
        case SubmitStatus::Rejected: return "rejected";
    }
    return "?";
}

struct SubmitResult {
    SubmitStatus status = SubmitStatus::Rejected;
    std::size_t remaining = 0;
    std::string reason;
};

inline std::string task_id(const std::string& session, std::uint64_t seq) { return session + ":" + std::to_string(seq); }

// Splits "<session>:<seq>".
inline std::pair<std::string, std::uint64_t> parse_task_id(const std::string& id) {
    const auto colon = id.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == id.size())
        throw NotFoundError("malformed task id '" + id + "'");
    std::uint64_t seq = 0;
    for (std::size_t i = colon + 1; i < id.size(); ++i) {
        if (id[i] < '0' || id[i] > '9') throw NotFoundError("malformed task id '" + id + "'");
        seq = seq * 10 + static_cast<std::uint64_t>(id[i] - '0');
    }
    return {id.substr(0, colon), seq};
}

// A worker's raw answer in canonical form: "yes"/"no" for set tasks, an
// object with exactly the asked attributes for point tasks.  A bare value
// string is accepted when a single attribute is asked.
inline Aggregate parse_answer(const AttributeSchema& schema, const QueryTask& t, const json& raw) {
    if (t.kind == TaskKind::Set) return aggregate_from_json(schema, TaskKind::Set, raw);
    Labels l(schema.size(), kUnspecified);
    if (raw.is_string()) {
        if (t.attributes.size() != 1) throw ConfigError("point answer must name a value per asked attribute");
        l[t.attributes[0]] = schema.value_index(t.attributes[0], raw.get<std::string>());
        return l;
    }
    if (!raw.is_object()) throw ConfigError("point answer must be an object of attribute values");
    for (const auto& [name, value] : raw.items()) {
        auto a = schema.find_attribute(name);
        if (!a || std::find(t.attributes.begin(), t.attributes.end(), *a) == t.attributes.end())
            throw ConfigError("attribute '" + name + "' was not asked");
        if (!value.is_string()) throw ConfigError("attribute values must be strings");
        l[*a] = schema.value_index(*a, value.get<std::string>());
    }
    for (auto a : t.attributes)
        if (l[a] == kUnspecified) throw ConfigError("answer lacks attribute '" + schema.attribute(a).name + "'");
    return l;
}

inline json answer_to_json(const AttributeSchema& schema, const QueryTask& t, const Aggregate& a) {
    if (const bool* yes = std::get_if<bool>(&a)) return *yes ? "yes" : "no";
    json out = json::object();
    const auto& l = std::get<Labels>(a);
    for (auto attr : t.attributes) out[schema.attribute(attr).name] = schema.value_name(attr, l[attr]);
    return out;
}

inline std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

class Session {
public:
    using Clock = std::function<std::int64_t()>;
    using Sink = std::function<void(const std::string& line)>;

    // Starts a new session: logs "created" and publishes the first frontier.
    static std::shared_ptr<Session> create(std::string id, SessionConfig cfg,
                                           std::shared_ptr<const ItemCollection> c, Clock clock, Sink sink = {}) {
        auto s = std::shared_ptr<Session>(new Session(std::move(id), std::move(cfg), std::move(c), std::move(clock)));
        s->sink_ = std::move(sink);
        std::lock_guard lock(s->write_mu_);
        const auto ts = s->clock_();
        s->log("created", json{{"session_id", s->id_}, {"config", session_config_to_json(s->cfg_)}}, ts);
        s->advance(ts);
        s->publish_snapshot();
        return s;
    }

    // Rebuilds a session from a log prefix.  A torn last line is dropped.
    // `collection_of` maps a manifest name to its collection.
    static std::shared_ptr<Session> restore(
        const std::string& jsonl,
        const std::function<std::shared_ptr<const ItemCollection>(const std::string&)>& collection_of, Clock clock) {
        std::vector<json> events;
        std::istringstream in(jsonl);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                events.push_back(json::parse(line));
            } catch (const json::parse_error&) {
                if (in.peek() == std::char_traits<char>::eof()) break;
                throw ConfigError("corrupt event log line " + std::to_string(events.size()));
            }
        }
        if (events.empty() || events[0].value("type", "") != "created")
            throw ConfigError("event log must start with a created event");
        const auto& created = events[0]["payload"];
        auto cfg = session_config_from_json(created.at("config"));
        auto c = collection_of(cfg.manifest);
        auto s = std::shared_ptr<Session>(
            new Session(created.at("session_id").get<std::string>(), std::move(cfg), std::move(c), std::move(clock)));
        std::lock_guard lock(s->write_mu_);
        const auto ts0 = events[0].value("ts", std::int64_t{0});
        s->log("created", created, ts0);
        s->advance(ts0);
        for (std::size_t e = 1; e < events.size(); ++e) {
            const auto& ev = events[e];
            if (ev.value("type", "") != "assigned") continue;
            const auto& p = ev.at("payload");
            const auto [sid, seq] = parse_task_id(p.at("task_id").get<std::string>());
            if (sid != s->id_) throw ConfigError("event log mixes sessions");
            const auto r = s->apply(seq, p.at("worker_id").get<std::string>(), p.at("answer"), ev.value("ts", ts0));
            const bool ignored = p.value("ignored", false);
            if (r.status == SubmitStatus::Rejected || ignored != (r.status == SubmitStatus::Canceled))
                throw ConfigError("event log diverges from the engine at event " + std::to_string(e));
        }
        s->publish_snapshot();
        return s;
    }

    const std::string& id() const { return id_; }
    const SessionConfig& config() const { return cfg_; }
    const ItemCollection& collection() const { return *collection_; }

    void set_sink(Sink sink) {
        std::lock_guard lock(write_mu_);
        sink_ = std::move(sink);
    }

    std::shared_ptr<const SessionSnapshot> snapshot() const {
        std::lock_guard lock(snap_mu_);
        return snap_;
    }

    SubmitResult submit(std::uint64_t seq, const std::string& worker, const json& answer) {
        std::lock_guard lock(write_mu_);
        auto r = apply(seq, worker, answer, clock_());
        release_lease(seq, worker);
        publish_snapshot();
        return r;
    }

    // Open tasks, oldest first.  With a reassignment timeout and a worker
    // id, a listing hands the worker at most one task and reserves one of
    // its remaining slots until the timeout; slots reserved by others are
    // not offered.
    std::vector<BoardTask> open_tasks(const std::optional<std::string>& worker) {
        if (cfg_.reassign_timeout_ms == 0 || !worker) {
            auto snap = snapshot();
            std::vector<BoardTask> out;
            for (const auto& [seq, t] : snap->tasks)
                if (t.open() && !(worker && t.answered_by(*worker))) out.push_back(t);
            return out;
        }
        std::lock_guard lock(write_mu_);
        const auto now = clock_();
        std::vector<BoardTask> out;
        for (auto& [seq, t] : board_) {
            if (!t.open() || t.answered_by(*worker)) continue;
            auto& held = leases_[seq];
            std::erase_if(held, [&](const auto& l) { return l.second <= now; });
            auto mine = std::find_if(held.begin(), held.end(), [&](const auto& l) { return l.first == *worker; });
            if (mine == held.end()) {
                if (held.size() >= t.remaining()) continue;
                held.emplace_back(*worker, now + cfg_.reassign_timeout_ms);
            }
            out.push_back(t);
            break;
        }
        return out;
    }

    std::string log_text() const {
        std::lock_guard lock(log_mu_);
        std::string out;
        for (const auto& l : lines_) {
            out += l;
            out += '\n';
        }
        return out;
    }

    std::size_t log_size() const {
        std::lock_guard lock(log_mu_);
        return lines_.size();
    }

private:
    Session(std::string id, SessionConfig cfg, std::shared_ptr<const ItemCollection> c, Clock clock)
        : id_(std::move(id)), cfg_(std::move(cfg)), collection_(std::move(c)), clock_(std::move(clock)) {
        if (!collection_) throw ConfigError("unknown manifest '" + cfg_.manifest + "'");
        if (!clock_) clock_ = wall_clock_ms;
        config_groups(cfg_, collection_->schema());  // validates patterns against the schema
    }

    void log(const std::string& type, json payload, std::int64_t ts) {
        json ev{{"seq", next_event_++}, {"ts", ts}, {"type", type}, {"payload", std::move(payload)}};
        auto line = ev.dump();
        {
            std::lock_guard lock(log_mu_);
            lines_.push_back(line);
        }
        if (sink_) sink_(line);
    }

    SubmitResult apply(std::uint64_t seq, const std::string& worker, const json& raw, std::int64_t ts) {
        auto it = board_.find(seq);
        if (it == board_.end()) throw NotFoundError("unknown task " + task_id(id_, seq));
        auto& bt = it->second;
        const auto tid = task_id(id_, seq);
        if (worker.empty()) throw ConfigError("worker_id must be non-empty");
        const auto& schema = collection_->schema();
        if (bt.status == TaskStatus::Canceled) {
            log("assigned", json{{"task_id", tid}, {"worker_id", worker}, {"answer", raw}, {"ignored", true}}, ts);
            return {SubmitStatus::Canceled, 0, "task is no longer needed"};
        }
        if (bt.status == TaskStatus::Resolved) return {SubmitStatus::Rejected, 0, "task is already resolved"};
        if (bt.answered_by(worker)) return {SubmitStatus::Rejected, bt.remaining(), "worker already answered this task"};
        auto vote = parse_answer(schema, bt.task, raw);

        log("assigned",
            json{{"task_id", tid}, {"worker_id", worker}, {"answer", answer_to_json(schema, bt.task, vote)},
                 {"ignored", false}},
            ts);
        ++assignments_;
        bt.workers.push_back(worker);
        bt.votes.push_back(std::move(vote));
        bt.status = TaskStatus::Answering;
        if (bt.votes.size() < bt.required) return {SubmitStatus::Answering, bt.remaining(), ""};

        std::optional<Aggregate> agg;
        if (bt.task.kind == TaskKind::Set) {
            std::vector<bool> yes;
            for (const auto& v : bt.votes) yes.push_back(std::get<bool>(v));
            if (auto m = majority(yes)) agg = *m;
        } else {
            std::vector<Labels> labels;
            for (const auto& v : bt.votes) labels.push_back(std::get<Labels>(v));
            if (auto p = plurality(labels, bt.task.attributes, schema)) agg = std::move(*p);
        }
        if (!agg) {
            bt.required = bt.votes.size() + 1;  // tie: one more worker
            return {SubmitStatus::Answering, bt.remaining(), ""};
        }
        bt.status = TaskStatus::Resolved;
        bt.answer = *agg;
        resolved_[seq] = Resolution{*agg, bt.votes.size(), fingerprint(bt.task, *collection_)};
        log("resolved",
            json{{"task_id", tid}, {"answer", answer_to_json(schema, bt.task, *agg)}, {"assignments", bt.votes.size()}},
            ts);
        leases_.erase(seq);
        // the engine only moves when the task it is blocked on resolves
        if (awaiting_ == seq) advance(ts);
        return {SubmitStatus::Resolved, 0, ""};
    }

    // Re-runs the engine and reconciles the board with its frontier.
    void advance(std::int64_t ts) {
        if (done_) return;
        BoardSource src(*collection_, cfg_.k, resolved_);
        std::optional<json> verdict;
        awaiting_.reset();
        try {
            verdict = run_engine(cfg_, *collection_, src);
        } catch (const AwaitingAnswer& a) {
            awaiting_ = a.seq;
        }
        used_ = src.asked();
        const auto& frontier = src.frontier();
        for (auto& [seq, bt] : board_) {
            if (!bt.open() || frontier.count(seq)) continue;
            bt.status = TaskStatus::Canceled;
            bt.inferred = src.inferred(seq);
            if (bt.inferred) bt.answer = true;
            leases_.erase(seq);
            log("canceled", json{{"task_id", task_id(id_, seq)}, {"reason", bt.inferred ? "inferred" : "unneeded"}},
                ts);
        }
        for (const auto& [seq, t] : frontier) {
            auto [it, fresh] = board_.try_emplace(seq);
            if (fresh) {
                it->second.task = t;
                it->second.required = cfg_.k;
            } else if (it->second.status == TaskStatus::Canceled) {
                throw std::logic_error("canceled task " + t.id + " reappeared on the frontier");
            }
        }
        if (verdict) {
            done_ = true;
            verdict_ = *verdict;
            log("verdict", *verdict, ts);
        }
    }

    void release_lease(std::uint64_t seq, const std::string& worker) {
        auto it = leases_.find(seq);
        if (it == leases_.end()) return;
        std::erase_if(it->second, [&](const auto& l) { return l.first == worker; });
    }

    void publish_snapshot() {
        auto s = std::make_shared<SessionSnapshot>();
        s->id = id_;
        s->config = cfg_;
        s->tasks = board_;
        s->used = used_;
        s->done = done_;
        s->verdict = verdict_;
        s->events = next_event_;
        s->assignments = assignments_;
        std::lock_guard lock(snap_mu_);
        snap_ = std::move(s);
    }

    std::string id_;
    SessionConfig cfg_;
    std::shared_ptr<const ItemCollection> collection_;
    Clock clock_;
    Sink sink_;

    std::mutex write_mu_;  // the single writer
    std::map<std::uint64_t, BoardTask> board_;
    std::map<std::uint64_t, Resolution> resolved_;
    std::set<std::uint64_t> used_;
    std::map<std::uint64_t, std::vector<std::pair<std::string, std::int64_t>>> leases_;
    std::optional<std::uint64_t> awaiting_;
    bool done_ = false;
    json verdict_;
    std::uint64_t next_event_ = 0;
    std::size_t assignments_ = 0;

    mutable std::mutex log_mu_;
    std::vector<std::string> lines_;

    mutable std::mutex snap_mu_;
    std::shared_ptr<const SessionSnapshot> snap_;
};

inline json task_to_json(const SessionSnapshot& s, const BoardTask& bt, const ItemCollection& c) {
    const auto& schema = c.schema();
    const auto& t = bt.task;
    json items = json::array();
    for (auto i : t.items)
        items.push_back({{"id", c[i].id}, {"image_url", "/items/" + c[i].id + "/image?session=" + s.id}});
    json out{{"task_id", task_id(s.id, t.seq)},
             {"seq", t.seq},
             {"session_id", s.id},
             {"kind", to_string(t.kind)},
             {"phase", t.phase},
             {"question_text", question_text(t, schema)},
             {"status", to_string(bt.status)},
             {"required_assignments", bt.required},
             {"assignments", bt.votes.size()},
             {"remaining_assignments", bt.remaining()},
             {"items", std::move(items)}};
    if (t.kind == TaskKind::Set) {
        json members = json::array();
        for (const auto& m : t.target.members) members.push_back(to_assignment_string(schema, m));
        out["negated"] = t.target.negated;
        out["group"] = t.target.name;
        out["target"] = std::move(members);
    } else {
        json attrs = json::array();
        for (auto a : t.attributes) attrs.push_back(schema.attribute(a).name);
        out["negated"] = false;
        out["group"] = nullptr;
        out["attributes"] = std::move(attrs);
    }
    if (bt.answer) out["answer"] = answer_to_json(schema, t, *bt.answer);
    if (bt.inferred) out["inferred"] = true;
    return out;
}

inline json session_status_json(const SessionSnapshot& s) {
    std::size_t counts[4] = {0, 0, 0, 0};
    std::size_t unused = 0;
    for (const auto& [seq, t] : s.tasks) {
        ++counts[static_cast<int>(t.status)];
        if (t.status == TaskStatus::Resolved && !s.used.count(seq)) ++unused;
    }
    json out{{"session_id", s.id},
             {"algorithm", s.config.algorithm},
             {"status", s.done ? "done" : "running"},
             {"tasks",
              {{"pending", counts[0]}, {"answering", counts[1]}, {"resolved", counts[2]}, {"canceled", counts[3]}}},
             {"resolved_unused", unused},
             {"assignments", s.assignments},
             {"events", s.events},
             {"config", session_config_to_json(s.config)}};
    if (s.done) out["verdict"] = s.verdict;
    return out;
}

struct ServiceOptions {
    std::optional<std::string> log_dir;  // one <session>.jsonl per session
    Session::Clock clock;                // wall clock when empty
};

class TaskService {
public:
    explicit TaskService(ServiceOptions opts = {}) : opts_(std::move(opts)) {
        if (!opts_.clock) opts_.clock = wall_clock_ms;
        if (opts_.log_dir) std::filesystem::create_directories(*opts_.log_dir);
    }

    // image_root resolves relative image paths of the manifest's items.
    void add_manifest(const std::string& name, ItemCollection c, std::string image_root = {}) {
        std::unique_lock lock(mu_);
        manifests_[name] = Manifest{std::make_shared<const ItemCollection>(std::move(c)), std::move(image_root)};
    }

    std::shared_ptr<const ItemCollection> manifest(const std::string& name) const {
        std::shared_lock lock(mu_);
        auto it = manifests_.find(name);
        return it == manifests_.end() ? nullptr : it->second.collection;
    }

    std::string create_session(const json& config) {
        auto cfg = session_config_from_json(config);
        auto c = manifest(cfg.manifest);
        if (!c) throw NotFoundError("unknown manifest '" + cfg.manifest + "'");
        std::string id;
        {
            std::unique_lock lock(mu_);
            id = "s" + std::to_string(++last_id_);
        }
        auto s = Session::create(id, std::move(cfg), std::move(c), opts_.clock, sink_for(id, /*truncate=*/true));
        std::unique_lock lock(mu_);
        sessions_[id] = s;
        return id;
    }

    std::shared_ptr<Session> session(const std::string& id) const {
        std::shared_lock lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
        return it->second;
    }

    std::vector<std::string> session_ids() const {
        std::shared_lock lock(mu_);
        std::vector<std::string> out;
        for (const auto& [id, s] : sessions_) out.push_back(id);
        return out;
    }

    SubmitResult submit(const std::string& task, const std::string& worker, const json& answer) {
        const auto [sid, seq] = parse_task_id(task);
        return session(sid)->submit(seq, worker, answer);
    }

    // Rebuilds a session from its event log (or a prefix of it) and makes
    // it live again; the regenerated log replaces the stored one.
    std::string restore(const std::string& jsonl) {
        auto s = Session::restore(
            jsonl, [this](const std::string& name) { return manifest(name); }, opts_.clock);
        if (opts_.log_dir) {
            const auto path = log_path(s->id());
            write_file(path + ".tmp", s->log_text());
            std::filesystem::rename(path + ".tmp", path);
        }
        s->set_sink(sink_for(s->id(), /*truncate=*/false));
        std::unique_lock lock(mu_);
        if (sessions_.count(s->id())) throw ConfigError("session '" + s->id() + "' is already live");
        sessions_[s->id()] = s;
        if (s->id().size() > 1 && s->id()[0] == 's') {
            try {
                last_id_ = std::max<std::uint64_t>(last_id_, std::stoull(s->id().substr(1)));
            } catch (const std::exception&) {
            }
        }
        return s->id();
    }

    // Restores every session found in the log directory.
    std::vector<std::string> resume_all() {
        std::vector<std::string> out;
        if (!opts_.log_dir) return out;
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(*opts_.log_dir))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(restore(read_file(f.string())));
        return out;
    }

    struct Image {
        std::string bytes;
        std::string content_type;
    };

    // Image bytes of an item; `session` narrows the lookup to its manifest.
    Image image(const std::string& item_id, const std::optional<std::string>& session_id) const {
        std::vector<Manifest> candidates;
        if (session_id) {
            const auto name = session(*session_id)->config().manifest;
            std::shared_lock lock(mu_);
            candidates.push_back(manifests_.at(name));
        } else {
            std::shared_lock lock(mu_);
            for (const auto& [name, m] : manifests_) candidates.push_back(m);
        }
        for (const auto& m : candidates) {
            auto idx = m.collection->find(item_id);
            if (!idx) continue;
            const auto& ref = (*m.collection)[*idx].image;
            if (ref.empty()) throw NotFoundError("item '" + item_id + "' has no image");
            std::filesystem::path p(ref);
            if (p.is_relative() && !m.image_root.empty()) p = std::filesystem::path(m.image_root) / p;
            std::ifstream in(p, std::ios::binary);
            if (!in) throw NotFoundError("image of item '" + item_id + "' is not readable");
            std::ostringstream ss;
            ss << in.rdbuf();
            return Image{ss.str(), content_type_of(p.extension().string())};
        }
        throw NotFoundError("unknown item '" + item_id + "'");
    }

private:
    struct Manifest {
        std::shared_ptr<const ItemCollection> collection;
        std::string image_root;
    };

    static std::string content_type_of(std::string ext) {
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
        if (ext == ".png") return "image/png";
        if (ext == ".gif") return "image/gif";
        if (ext == ".svg") return "image/svg+xml";
        if (ext == ".webp") return "image/webp";
        return "application/octet-stream";
    }

    std::string log_path(const std::string& id) const { return (std::filesystem::path(*opts_.log_dir) / (id + ".jsonl")).string(); }

    Session::Sink sink_for(const std::string& id, bool truncate) const {
        if (!opts_.log_dir) return {};
        auto out = std::make_shared<std::ofstream>(log_path(id), truncate ? std::ios::trunc : std::ios::app);
        if (!*out) throw ConfigError("cannot write event log for session " + id);
        return [out](const std::string& line) {
            *out << line << '\n';
            out->flush();
        };
    }

    ServiceOptions opts_;
    mutable std::shared_mutex mu_;
    std::map<std::string, Manifest> manifests_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t last_id_ = 0;
};

} // namespace coverage
