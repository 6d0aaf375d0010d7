#pragma once

// Synthetic instances, prediction planting, parameter sweeps and CSV reports.
//
// Sweep spec (JSON):
//   { "algorithm": "group" | "base" | "multiple" | "intersectional" | "classifier",
//     "N": 100000, "n": 50, "tau": 50, "c": 2, "p": 0, "k": 3,
//     "seeds": 20 | [1, 2, 3],
//     "schema": {...},                       optional; default gender {female, male}
//     "target": "female",                    group / base / classifier
//     "f": 50 | "tau",                       planted target count; "tau" follows tau
//     "counts": {"race=Black": 15, ...},     multiple / intersectional
//     "rest": "race=White",                  leaf absorbing N minus the listed counts
//     "preset": "effective1",                replaces schema and counts
//     "classifier": {"predicted": 100, "precision": 0.99},
//     "sweep": {"param": "f", "values": [0, 10, 20]},
//     "baseline": true,
//     "threads": 1 }

#include "coverage/aggregation.hpp"
#include "coverage/answer_source.hpp"
#include "coverage/classifier.hpp"
#include "coverage/collection.hpp"
#include "coverage/errors.hpp"
#include "coverage/group_coverage.hpp"
#include "coverage/io.hpp"
#include "coverage/lattice.hpp"
#include "coverage/schema.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

namespace coverage {

// Fully specified assignment and how many items carry it.
using PlantedCounts = std::vector<std::pair<Labels, std::size_t>>;

inline std::string item_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "i%06zu", i + 1);
    return buf;
}

inline ItemCollection generate(const AttributeSchema& schema, std::size_t N, const PlantedCounts& counts,
                               std::uint64_t seed) {
    std::size_t total = 0;
    for (const auto& [labels, count] : counts) {
        Pattern(labels).validate(schema);
        if (Pattern(labels).level() != schema.size())
            throw ConfigError("planted counts need fully specified assignments");
        total += count;
    }
    if (total != N)
        throw ConfigError("planted counts sum to " + std::to_string(total) + ", expected N=" + std::to_string(N));

    std::vector<Labels> rows;
    rows.reserve(N);
    for (const auto& [labels, count] : counts) rows.insert(rows.end(), count, labels);
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);

    std::vector<Item> items;
    items.reserve(N);
    for (std::size_t i = 0; i < N; ++i) items.push_back(Item{item_id(i), "", std::move(rows[i]), std::nullopt});
    return ItemCollection(schema, std::move(items));
}

inline AttributeSchema binary_schema() { return AttributeSchema({{"gender", {"female", "male"}}}); }

// Binary instance: f items of the first value, the rest of the second.
inline ItemCollection generate_binary(std::size_t N, std::size_t f, std::uint64_t seed) {
    if (f > N) throw ConfigError("planted count exceeds N");
    return generate(binary_schema(), N, {{Labels{0}, f}, {Labels{1}, N - f}}, seed);
}

// Marks `predicted` items as predicted members of g, `true_positives` of
// which really are members.  Other items are predicted as something else;
// predicted labels equal the truth on attributes g does not reference.
inline ItemCollection plant_predictions(const ItemCollection& c, const Group& g, std::size_t predicted,
                                        std::size_t true_positives, std::uint64_t seed) {
    if (true_positives > predicted) throw ConfigError("true positives exceed the predicted set");
    std::vector<std::size_t> members, others;
    for (std::size_t i = 0; i < c.size(); ++i) (match(c.truth(i), g.pattern) ? members : others).push_back(i);
    if (true_positives > members.size() || predicted - true_positives > others.size())
        throw ConfigError("cannot plant predictions: not enough members or non-members");

    std::mt19937_64 rng(seed);
    std::shuffle(members.begin(), members.end(), rng);
    std::shuffle(others.begin(), others.end(), rng);
    std::vector<char> in_g(c.size(), 0);
    for (std::size_t i = 0; i < true_positives; ++i) in_g[members[i]] = 1;
    for (std::size_t i = 0; i < predicted - true_positives; ++i) in_g[others[i]] = 1;

    const auto slots = g.pattern.specified_slots();
    const auto& schema = c.schema();
    std::vector<Item> items;
    items.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        Item it = c[i];
        Labels pred = *it.truth;
        if (in_g[i]) {
            for (auto a : slots) pred[a] = g.pattern.slots()[a];
        } else if (match(pred, g.pattern)) {
            // a false negative: move the first referenced attribute off the target value
            const auto a = slots.front();
            pred[a] = static_cast<ValueIndex>((pred[a] + 1) % static_cast<ValueIndex>(schema.cardinality(a)));
        }
        it.predicted = std::move(pred);
        items.push_back(std::move(it));
    }
    return ItemCollection(schema, std::move(items));
}

struct Preset {
    std::string name;
    AttributeSchema schema;
    std::vector<std::size_t> minorities;  // counts of values 2..4; value 1 takes the rest
};

// sigma = 4 settings: one majority value plus three minorities.
inline std::vector<std::string> preset_names() { return {"effective1", "effective2", "ineffective", "adversarial"}; }

inline Preset preset(const std::string& name) {
    AttributeSchema schema({{"group", {"majority", "minority1", "minority2", "minority3"}}});
    if (name == "effective1") return {name, schema, {10, 15, 20}};
    if (name == "effective2") return {name, schema, {100, 150, 200}};
    if (name == "ineffective") return {name, schema, {10, 20, 200}};
    if (name == "adversarial") return {name, schema, {30, 35, 40}};
    throw ConfigError("unknown preset '" + name + "'");
}

inline PlantedCounts preset_counts(const Preset& p, std::size_t N) {
    std::size_t minor = 0;
    for (auto m : p.minorities) minor += m;
    if (minor > N) throw ConfigError("preset minorities exceed N");
    PlantedCounts out{{Labels{0}, N - minor}};
    for (std::size_t i = 0; i < p.minorities.size(); ++i) out.push_back({Labels{static_cast<ValueIndex>(i + 1)}, p.minorities[i]});
    return out;
}

struct ExperimentSpec {
    std::string algorithm = "group";
    std::size_t N = 1000;
    std::size_t n = 50;
    std::size_t tau = 50;
    double c = 2.0;
    double p = 0.0;
    unsigned k = 3;
    std::vector<std::uint64_t> seeds{0};
    AttributeSchema schema = binary_schema();
    std::string target = "female";
    std::optional<std::size_t> f;
    bool f_tracks_tau = false;
    std::vector<std::pair<std::string, std::size_t>> counts;  // assignment string -> count
    std::optional<std::string> rest;
    std::optional<std::string> preset_name;
    std::size_t predicted = 0;
    double precision = 1.0;
    std::string param_name;
    std::vector<double> param_values;
    bool baseline = false;
    unsigned threads = 1;
};

inline const std::vector<std::string>& algorithms() {
    static const std::vector<std::string> names{"group", "base", "multiple", "intersectional", "classifier"};
    return names;
}

inline ExperimentSpec spec_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
    ExperimentSpec s;
    try {
        s.algorithm = j.value("algorithm", s.algorithm);
        s.N = j.value("N", s.N);
        s.n = j.value("n", s.n);
        s.tau = j.value("tau", s.tau);
        s.c = j.value("c", s.c);
        s.p = j.value("p", s.p);
        s.k = j.value("k", s.k);
        if (j.contains("seeds")) {
            const auto& js = j["seeds"];
            s.seeds.clear();
            if (js.is_number_integer()) {
                for (std::uint64_t i = 0; i < js.get<std::uint64_t>(); ++i) s.seeds.push_back(i);
            } else {
                s.seeds = js.get<std::vector<std::uint64_t>>();
            }
        }
        if (j.contains("schema")) s.schema = schema_from_json(j["schema"]);
        s.target = j.value("target", s.target);
        if (j.contains("f")) {
            if (j["f"] == "tau") s.f_tracks_tau = true;
            else s.f = j["f"].get<std::size_t>();
        }
        if (j.contains("counts"))
            for (auto it = j["counts"].begin(); it != j["counts"].end(); ++it)
                s.counts.emplace_back(it.key(), it.value().get<std::size_t>());
        if (j.contains("rest")) s.rest = j["rest"].get<std::string>();
        if (j.contains("preset")) {
            s.preset_name = j["preset"].get<std::string>();
            s.schema = preset(*s.preset_name).schema;
        }
        if (j.contains("classifier")) {
            s.predicted = j["classifier"].value("predicted", std::size_t{0});
            s.precision = j["classifier"].value("precision", 1.0);
        }
        if (j.contains("sweep")) {
            s.param_name = j["sweep"].at("param").get<std::string>();
            s.param_values = j["sweep"].at("values").get<std::vector<double>>();
        }
        s.baseline = j.value("baseline", false);
        s.threads = std::max(1u, j.value("threads", 1u));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad experiment spec: ") + e.what());
    }
    if (std::find(algorithms().begin(), algorithms().end(), s.algorithm) == algorithms().end())
        throw ConfigError("unknown algorithm '" + s.algorithm + "'");
    static const std::vector<std::string> params{"", "f", "tau", "n", "N", "p", "k", "c", "precision"};
    if (std::find(params.begin(), params.end(), s.param_name) == params.end())
        throw ConfigError("unknown sweep parameter '" + s.param_name + "'");
    if (s.seeds.empty()) throw ConfigError("spec needs at least one seed");
    return s;
}

// Applies one sweep value to a copy of the spec.
inline ExperimentSpec with_param(ExperimentSpec s, const std::string& name, double value) {
    const auto as_size = [&] {
        if (value < 0 || std::floor(value) != value) throw ConfigError(name + " must be a non-negative integer");
        return static_cast<std::size_t>(value);
    };
    if (name.empty()) return s;
    if (name == "f") {
        s.f = as_size();
        s.f_tracks_tau = false;
    }
    else if (name == "tau") s.tau = as_size();
    else if (name == "n") s.n = as_size();
    else if (name == "N") s.N = as_size();
    else if (name == "p") s.p = value;
    else if (name == "k") s.k = static_cast<unsigned>(as_size());
    else if (name == "c") s.c = value;
    else if (name == "precision") s.precision = value;
    return s;
}

inline PlantedCounts planted_counts(const ExperimentSpec& s) {
    if (s.preset_name) return preset_counts(preset(*s.preset_name), s.N);
    const auto& schema = s.schema;
    if (s.counts.empty()) {
        // binary shorthand: f members of the target, everything else in the first other leaf
        if (!s.f && !s.f_tracks_tau) throw ConfigError("spec needs 'f', 'counts' or 'preset'");
        if (schema.size() != 1) throw ConfigError("'f' shorthand needs a single-attribute schema");
        const auto t = parse_pattern(schema, s.target);
        const std::size_t f = s.f_tracks_tau ? s.tau : *s.f;
        if (f > s.N) throw ConfigError("planted count exceeds N");
        const ValueIndex other = t[0] == 0 ? 1 : 0;
        return {{Labels{t[0]}, f}, {Labels{other}, s.N - f}};
    }
    PlantedCounts out;
    std::size_t listed = 0;
    for (const auto& [text, count] : s.counts) {
        auto p = parse_pattern(schema, text);
        if (p.level() != schema.size()) throw ConfigError("count key '" + text + "' must specify every attribute");
        out.emplace_back(Labels(p.slots().begin(), p.slots().end()), count);
        listed += count;
    }
    if (s.rest) {
        auto p = parse_pattern(schema, *s.rest);
        if (p.level() != schema.size()) throw ConfigError("'rest' must specify every attribute");
        if (listed > s.N) throw ConfigError("listed counts exceed N");
        const Labels l(p.slots().begin(), p.slots().end());
        auto it = std::find_if(out.begin(), out.end(), [&](auto& e) { return e.first == l; });
        if (it != out.end()) it->second += s.N - listed;
        else out.emplace_back(l, s.N - listed);
    }
    return out;
}

struct SweepRow {
    std::string algorithm;
    std::size_t N = 0, n = 0, tau = 0;
    double c = 0, p = 0;
    unsigned k = 0;
    std::uint64_t seed = 0;
    std::string param_name;
    double param_value = 0;
    bool covered = false;
    std::size_t cnt = 0;
    std::size_t tasks = 0;
    std::size_t assignments = 0;
    std::size_t upper_bound = 0;
    std::optional<std::size_t> baseline_tasks;
};

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline const char* kCsvHeader =
    "algorithm,N,n,tau,c,p,k,seed,param_name,param_value,covered,cnt,tasks,assignments,upper_bound,baseline_tasks";

inline std::string to_csv_line(const SweepRow& r) {
    std::ostringstream os;
    os << r.algorithm << ',' << r.N << ',' << r.n << ',' << r.tau << ',' << format_number(r.c) << ','
       << format_number(r.p) << ',' << r.k << ',' << r.seed << ',' << r.param_name << ','
       << format_number(r.param_value) << ',' << (r.covered ? "true" : "false") << ',' << r.cnt << ',' << r.tasks
       << ',' << r.assignments << ',' << r.upper_bound << ',';
    if (r.baseline_tasks) os << *r.baseline_tasks;
    return os.str();
}

inline std::string to_csv(const std::vector<SweepRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) out += to_csv_line(r) + "\n";
    return out;
}

// Distinct, reproducible streams for data, crowd and sampling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline SweepRow run_cell(const ExperimentSpec& base, double param_value, std::uint64_t seed) {
    const ExperimentSpec s = with_param(base, base.param_name, param_value);
    if (s.n == 0 || s.tau == 0) throw ConfigError("n and tau must be at least 1");
    const auto collection = generate(s.schema, s.N, planted_counts(s), seed);
    const CrowdConfig crowd_cfg{s.p, s.k, derive_seed(seed, 1)};
    const auto order = collection.natural_order();

    SweepRow row;
    row.algorithm = s.algorithm;
    row.N = s.N;
    row.n = s.n;
    row.tau = s.tau;
    row.c = s.c;
    row.p = s.p;
    row.k = s.k;
    row.seed = seed;
    row.param_name = s.param_name;
    row.param_value = param_value;
    row.upper_bound = s.N == 0 ? 0 : reported_upper_bound(s.N, s.n, s.tau);

    SimulatedCrowd crowd(collection, crowd_cfg);
    const auto& schema = collection.schema();
    auto independent_runs = [&](const std::vector<Group>& groups, const ItemCollection& c) {
        SimulatedCrowd fresh(c, crowd_cfg);
        std::size_t total = 0;
        for (const auto& g : groups) total += group_coverage(order, s.n, s.tau, g, fresh).tasks_issued;
        return total;
    };

    if (s.algorithm == "group" || s.algorithm == "base") {
        const auto g = make_group(schema, parse_pattern(schema, s.target));
        auto v = s.algorithm == "group" ? group_coverage(order, s.n, s.tau, g, crowd)
                                        : base_coverage(order, s.tau, g, crowd);
        row.covered = v.covered;
        row.cnt = v.cnt;
        row.tasks = v.tasks_issued;
        row.assignments = v.assignments_issued;
        if (s.baseline) {
            SimulatedCrowd fresh(collection, crowd_cfg);
            row.baseline_tasks = s.algorithm == "group" ? base_coverage(order, s.tau, g, fresh).tasks_issued
                                                        : group_coverage(order, s.n, s.tau, g, fresh).tasks_issued;
        }
    } else if (s.algorithm == "multiple") {
        if (schema.size() != 1) throw ConfigError("multiple coverage audits the values of one attribute");
        const auto groups = groups_of_attribute(schema, 0);
        MultipleOptions mo;
        mo.c = s.c;
        mo.seed = derive_seed(seed, 2);
        auto r = multiple_coverage(collection, order, s.n, s.tau, groups, crowd, mo);
        row.covered = r.all_covered();
        row.cnt = r.uncovered_count();
        row.tasks = r.tasks_issued;
        row.assignments = r.assignments_issued;
        if (s.baseline) row.baseline_tasks = independent_runs(groups, collection);
    } else if (s.algorithm == "intersectional") {
        MultipleOptions mo;
        mo.c = s.c;
        mo.seed = derive_seed(seed, 2);
        auto r = intersectional_coverage(collection, order, s.n, s.tau, crowd, mo);
        row.covered = r.report.mups.empty();
        row.cnt = r.report.mups.size();
        row.tasks = r.tasks_issued;
        row.assignments = r.assignments_issued;
        if (s.baseline) row.baseline_tasks = independent_runs(fully_specified_groups(schema), collection);
    } else {
        const auto g = make_group(schema, parse_pattern(schema, s.target));
        const auto tp = static_cast<std::size_t>(std::llround(s.precision * static_cast<double>(s.predicted)));
        const auto with_pred = plant_predictions(collection, g, s.predicted, tp, derive_seed(seed, 3));
        SimulatedCrowd pcrowd(with_pred, crowd_cfg);
        ClassifierOptions co;
        co.seed = derive_seed(seed, 4);
        auto r = classifier_coverage(with_pred, s.n, s.tau, g, pcrowd, co);
        row.covered = r.verdict.covered;
        row.cnt = r.verdict.cnt;
        row.tasks = r.total_tasks();
        row.assignments = r.verdict.assignments_issued;
        if (s.baseline) {
            SimulatedCrowd fresh(with_pred, crowd_cfg);
            row.baseline_tasks = group_coverage(order, s.n, s.tau, g, fresh).tasks_issued;
        }
    }
    return row;
}

// Every (parameter value, seed) cell; rows sorted by (param_value, seed).
inline std::vector<SweepRow> sweep(const ExperimentSpec& spec) {
    std::vector<double> values = spec.param_values;
    if (values.empty()) values.push_back(0.0);
    std::vector<std::pair<double, std::uint64_t>> cells;
    for (auto v : values)
        for (auto seed : spec.seeds) cells.emplace_back(v, seed);
    std::sort(cells.begin(), cells.end());

    std::vector<SweepRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < cells.size();) {
            try {
                rows[i] = run_cell(spec, cells[i].first, cells[i].second);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned threads = std::min<unsigned>(spec.threads, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

struct ReportLine {
    std::string algorithm, param_name;
    double param_value = 0;
    std::size_t runs = 0;
    double covered_rate = 0, mean_tasks = 0, mean_baseline = 0;
    std::size_t min_tasks = 0, max_tasks = 0, upper_bound = 0;
    bool has_baseline = false;
};

// Per-(algorithm, parameter value) summary of a sweep CSV.
inline std::vector<ReportLine> summarize(const std::string& csv_text) {
    const auto rows = parse_csv(csv_text);
    if (rows.empty() || rows.front().size() != 16) throw ConfigError("not a sweep CSV (unexpected header)");
    std::map<std::tuple<std::string, std::string, double>, ReportLine> acc;
    std::vector<std::tuple<std::string, std::string, double>> order;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 16) throw ConfigError("malformed sweep CSV row " + std::to_string(r + 1));
        const auto key = std::make_tuple(f[0], f[8], std::stod(f[9]));
        auto [it, fresh] = acc.try_emplace(key);
        auto& line = it->second;
        if (fresh) {
            order.push_back(key);
            line.algorithm = f[0];
            line.param_name = f[8];
            line.param_value = std::get<2>(key);
            line.min_tasks = SIZE_MAX;
        }
        const auto tasks = std::stoull(f[12]);
        ++line.runs;
        line.covered_rate += f[10] == "true" ? 1.0 : 0.0;
        line.mean_tasks += static_cast<double>(tasks);
        line.min_tasks = std::min<std::size_t>(line.min_tasks, tasks);
        line.max_tasks = std::max<std::size_t>(line.max_tasks, tasks);
        line.upper_bound = std::stoull(f[14]);
        if (!f[15].empty()) {
            line.has_baseline = true;
            line.mean_baseline += std::stod(f[15]);
        }
    }
    std::vector<ReportLine> out;
    for (const auto& key : order) {
        auto line = acc.at(key);
        const auto n = static_cast<double>(line.runs);
        line.covered_rate /= n;
        line.mean_tasks /= n;
        line.mean_baseline /= n;
        out.push_back(line);
    }
    return out;
}

inline std::string report_text(const std::vector<ReportLine>& lines) {
    std::ostringstream os;
    os << "algorithm,param_name,param_value,runs,covered_rate,mean_tasks,min_tasks,max_tasks,upper_bound,"
          "mean_baseline_tasks\n";
    for (const auto& l : lines) {
        char mean[32], rate[32], base[32];
        std::snprintf(mean, sizeof mean, "%.2f", l.mean_tasks);
        std::snprintf(rate, sizeof rate, "%.3f", l.covered_rate);
        std::snprintf(base, sizeof base, "%.2f", l.mean_baseline);
        os << l.algorithm << ',' << l.param_name << ',' << format_number(l.param_value) << ',' << l.runs << ','
           << rate << ',' << mean << ',' << l.min_tasks << ',' << l.max_tasks << ',' << l.upper_bound << ','
           << (l.has_baseline ? base : "") << '\n';
    }
    return os.str();
}

} // namespace coverage
