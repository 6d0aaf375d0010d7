// coverage: generate instances, run audits against a simulated crowd, sweep
// parameters, summarise sweeps, or serve sessions to human workers.
//
// Exit status: 0 ok, 2 bad configuration, 3 the answer source failed.

#include "coverage/coverage.hpp"
#include "coverage/http.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace coverage;

namespace {

constexpr int kConfigExit = 2;
constexpr int kSourceExit = 3;

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") std::cout << text;
    else write_file(out, text);
}

struct GenerateArgs {
    std::size_t N = 1000;
    std::optional<std::size_t> f;
    std::string target = "female";
    std::string preset;
    std::string spec;
    std::uint64_t seed = 0;
    std::size_t predicted = 0;
    double precision = 1.0;
    std::string out;
};

int do_generate(const GenerateArgs& a) {
    ExperimentSpec s;
    if (!a.spec.empty()) s = spec_from_json(parse_json(read_file(a.spec), a.spec));
    s.N = a.N;
    if (a.f) {
        s.f = a.f;
        s.f_tracks_tau = false;
    }
    if (!a.preset.empty()) {
        s.preset_name = a.preset;
        s.schema = preset(a.preset).schema;
    }
    if (a.spec.empty()) s.target = a.target;
    if (!s.f && !s.f_tracks_tau && s.counts.empty() && !s.preset_name)
        throw ConfigError("generate needs --f, --preset or --spec");
    auto c = generate(s.schema, s.N, planted_counts(s), a.seed);
    if (a.predicted > 0) {
        const auto g = make_group(c.schema(), parse_pattern(c.schema(), s.target));
        const auto tp = static_cast<std::size_t>(std::llround(a.precision * static_cast<double>(a.predicted)));
        c = plant_predictions(c, g, a.predicted, tp, derive_seed(a.seed, 3));
    }
    emit(manifest_to_json(c).dump(1) + "\n", a.out);
    return 0;
}

struct RunArgs {
    std::string algorithm;
    std::string manifest;
    std::string predictions;
    std::vector<std::string> groups;
    std::string attribute;
    std::size_t n = 50, tau = 50;
    double c = 2.0, p = 0.0;
    unsigned k = 3;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> shuffle_seed;
    bool multi = false;
    std::string out;
};

int do_run(const RunArgs& a) {
    auto collection = load_manifest(a.manifest);
    if (!a.predictions.empty()) collection = with_predictions_csv(collection, read_file(a.predictions));
    json cfg{{"algorithm", a.algorithm}, {"manifest", a.manifest}, {"groups", a.groups}, {"n", a.n},
             {"tau", a.tau}, {"k", a.k}, {"c", a.c}, {"seed", a.seed}, {"multi", a.multi}};
    if (!a.attribute.empty()) cfg["attribute"] = a.attribute;
    if (a.shuffle_seed) cfg["shuffle_seed"] = *a.shuffle_seed;
    const auto config = session_config_from_json(cfg);
    SimulatedCrowd crowd(collection, CrowdConfig{a.p, a.k, derive_seed(a.seed, 1)});
    auto result = run_engine(config, collection, crowd);
    emit(result.dump(1) + "\n", a.out);
    return 0;
}

struct SweepArgs {
    std::string spec;
    std::optional<std::size_t> seeds;
    unsigned threads = 0;
    std::string out;
};

int do_sweep(const SweepArgs& a) {
    auto j = parse_json(read_file(a.spec), a.spec);
    if (a.seeds) j["seeds"] = *a.seeds;
    else if (!j.contains("seeds")) j["seeds"] = 20;
    auto spec = spec_from_json(j);
    if (a.threads) spec.threads = a.threads;
    emit(to_csv(sweep(spec)), a.out);
    return 0;
}

int do_report(const std::string& csv, const std::string& out) {
    emit(report_text(summarize(read_file(csv))), out);
    return 0;
}

struct ServeArgs {
    std::vector<std::string> manifests;  // name=path or path
    std::string log_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
};

int do_serve(const ServeArgs& a) {
    ServiceOptions opts;
    if (!a.log_dir.empty()) opts.log_dir = a.log_dir;
    TaskService service(std::move(opts));
    for (const auto& m : a.manifests) {
        const auto eq = m.find('=');
        const std::string path = eq == std::string::npos ? m : m.substr(eq + 1);
        const std::string name = eq == std::string::npos ? std::filesystem::path(path).stem().string() : m.substr(0, eq);
        service.add_manifest(name, load_manifest(path), std::filesystem::path(path).parent_path().string());
        std::cerr << "manifest " << name << " <- " << path << "\n";
    }
    for (const auto& id : service.resume_all()) std::cerr << "resumed session " << id << "\n";
    HttpFrontend http(service);
    http.bind(a.host, a.port);
    std::cerr << "listening on http://" << a.host << ":" << a.port << "\n";
    http.serve();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coverage audits with crowd set queries"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic manifest");
    g->add_option("--N", gen.N, "collection size");
    g->add_option("--f", gen.f, "planted members of --target (binary schema)");
    g->add_option("--target", gen.target, "target group");
    g->add_option("--preset", gen.preset, "effective1 | effective2 | ineffective | adversarial");
    g->add_option("--spec", gen.spec, "experiment spec with schema and counts")->check(CLI::ExistingFile);
    g->add_option("--seed", gen.seed, "shuffle seed");
    auto* pred = g->add_option("--predicted", gen.predicted, "plant this many predicted members of --target");
    g->add_option("--precision", gen.precision, "fraction of predicted items that are true members")->needs(pred);
    g->add_option("--out", gen.out, "output path (stdout by default)");

    RunArgs run;
    auto* r = app.add_subcommand("run", "Audit a manifest with simulated workers");
    r->add_option("algorithm", run.algorithm)->required()->check(CLI::IsMember(algorithms()));
    r->add_option("--manifest", run.manifest, "manifest JSON")->required()->check(CLI::ExistingFile);
    r->add_option("--predictions", run.predictions, "CSV of id,predicted.<attr>")->check(CLI::ExistingFile);
    r->add_option("--group", run.groups, "target pattern, e.g. gender=female (repeatable)");
    r->add_option("--attribute", run.attribute, "attribute whose values multiple audits");
    r->add_option("--n", run.n, "initial set size");
    r->add_option("--tau", run.tau, "coverage threshold");
    r->add_option("--c", run.c, "sampling constant");
    r->add_option("--p", run.p, "per-answer worker error rate");
    r->add_option("--k", run.k, "assignments per task");
    r->add_option("--seed", run.seed);
    r->add_option("--shuffle-seed", run.shuffle_seed, "shuffle the collection before partitioning");
    r->add_flag("--multi", run.multi, "label several attributes per point query");
    r->add_option("--out", run.out, "output path (stdout by default)");

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "Run an experiment spec, one CSV row per cell");
    s->add_option("--spec", sw.spec)->required()->check(CLI::ExistingFile);
    s->add_option("--seeds", sw.seeds, "seeds per point (default 20 unless the spec says)");
    s->add_option("--threads", sw.threads);
    s->add_option("--out", sw.out);

    std::string csv, report_out;
    auto* rep = app.add_subcommand("report", "Summarise a sweep CSV");
    rep->add_option("--csv", csv)->required()->check(CLI::ExistingFile);
    rep->add_option("--out", report_out);

    ServeArgs sv;
    auto* srv = app.add_subcommand("serve", "Serve sessions over HTTP");
    srv->add_option("--manifest", sv.manifests, "name=path.json (repeatable; name defaults to the file stem)")
        ->required();
    srv->add_option("--log-dir", sv.log_dir, "event logs; existing sessions are resumed");
    srv->add_option("--host", sv.host);
    srv->add_option("--port", sv.port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (*g) return do_generate(gen);
        if (*r) return do_run(run);
        if (*s) return do_sweep(sw);
        if (*rep) return do_report(csv, report_out);
        if (*srv) return do_serve(sv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const NotFoundError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const CoverageAborted& e) {
        std::cerr << "answer source failed: " << e.what() << "\n";
        std::cerr << verdict_to_json(e.partial()).dump() << "\n";
        return kSourceExit;
    } catch (const AnswerSourceError& e) {
        std::cerr << "answer source failed: " << e.what() << "\n";
        return kSourceExit;
    } catch (const PartialLabelError& e) {
        std::cerr << "answer source failed: " << e.what() << "\n";
        return kSourceExit;
    }
    return 0;
}
