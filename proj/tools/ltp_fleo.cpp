#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ltpfleo/analysis.hpp"
#include "ltpfleo/config.hpp"
#include "ltpfleo/diagnostics.hpp"
#include "ltpfleo/event_log.hpp"
#include "ltpfleo/model.hpp"
#include "ltpfleo/parallel.hpp"
#include "ltpfleo/privacy_audit.hpp"
#include "ltpfleo/rng.hpp"
#include "ltpfleo/simulator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ltp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAssertion = 3;

// Config, usage and schema problems.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Visibility needs only the orbital fields, and accepts a zero horizon.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                          bool orbital_only = false) {
    ConfigFile file = path.empty() ? ConfigFile{} : load_config(path);
    for (const auto& o : overrides) apply_override(file, o);
    auto rc = resolve_config(file);
    try {
        if (orbital_only) {
            rc.sim.constellation.validate();
            rc.sim.station.validate();
            if (!(rc.sim.horizon_s >= 0.0)) throw std::invalid_argument("visibility.horizon_s must be >= 0");
        } else {
            rc.sim.validate();
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return rc;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

EventLog load_log(const fs::path& path) {
    try {
        return read_event_log(path);
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find("schema version mismatch") != std::string::npos) throw UsageError(e.what());
        throw;
    }
}

ParticipationLog participation_from(const EventLog& log) {
    ParticipationLog p(log.header.partitions.size());
    for (const auto& r : log.rounds) p.record_round(r.selected, r.round);
    return p;
}

bool bound_applies(const LossSpec& loss) {
    return loss.kind == LossKind::quadratic || (loss.kind == LossKind::logistic_l2 && loss.regularization > 0.0);
}

// round, aggregations, loss, gap, bound
std::string bound_csv(const EventLog& log, const ConvexityConstants& c, const BoundParams& p, std::size_t I) {
    std::string out = "round,aggregations,loss,gap,bound\n";
    std::size_t aggs = 0;
    for (const auto& r : log.rounds) {
        if (!r.skipped) ++aggs;
        if (aggs == 0) continue;
        const double bound = gap_bound(c, p, I, static_cast<double>(aggs));
        if (r.loss)
            out += fmt::format("{},{},{},{},{}\n", r.round, aggs, *r.loss, *r.loss - c.optimal_loss, bound);
        else
            out += fmt::format("{},{},,,{}\n", r.round, aggs, bound);
    }
    return out;
}

std::string confusion_csv(const FairnessReport& f) {
    std::string out = "true_class";
    for (std::size_t j = 0; j < f.confusion.size(); ++j) out += fmt::format(",pred_{}", j);
    out += ",accuracy\n";
    for (std::size_t i = 0; i < f.confusion.size(); ++i) {
        out += fmt::format("{}", i);
        for (auto v : f.confusion[i]) out += fmt::format(",{}", v);
        out += fmt::format(",{}\n", f.per_class_accuracy[i]);
    }
    return out;
}

json constants_json(const ConvexityConstants& c, const BoundParams& p) {
    return json{{"smoothness", c.smoothness},       {"strong_convexity", c.strong_convexity},
                {"sigma", c.sigma},                 {"gradient_bound", c.gradient_bound},
                {"heterogeneity", c.heterogeneity}, {"optimal_loss", c.optimal_loss},
                {"kappa", p.kappa},                 {"upsilon", p.upsilon},
                {"lambda", p.lambda},               {"nu", p.nu},
                {"initial_gap", p.initial_gap}};
}

std::vector<SatelliteId> parse_ids(const std::string& list) {
    std::vector<SatelliteId> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(fmt::format("--colluders: '{}' is not a satellite id", item));
        }
    }
    return out;
}

void print_audit_summary(const RunAudit& audit, std::size_t L) {
    std::size_t failed = 0;
    for (const auto& w : audit.windows)
        if (w.verdict == Verdict::fail) ++failed;
    fmt::print("audited {} window(s) at L={}: {} passed, {} failed\n", audit.windows.size(), L,
               audit.windows.size() - failed, failed);
    fmt::print("verdict: {}\n", audit.passed() ? fmt::format("LTP-PASS({})", L) : std::string("LTP-FAIL"));
}

// ---- subcommands ----

struct VisibilityArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string output = "schedule.csv";
};

int cmd_visibility(const VisibilityArgs& a) {
    const auto rc = load_run_config(a.config, a.overrides, true);
    const auto& s = rc.sim;
    const auto schedule = compute_visibility(s.constellation, s.station, s.horizon_s, s.visibility);
    std::ostringstream csv;
    schedule.write_csv(csv);
    write_text(a.output, csv.str());
    fmt::print("horizon {} s, {} satellites -> {}\n", s.horizon_s, schedule.num_satellites(), a.output);
    fmt::print("satellite,passes,mean_duration_s\n");
    for (std::size_t k = 0; k < schedule.num_satellites(); ++k) {
        const auto& w = schedule.windows[k];
        const double mean = w.empty() ? 0.0 : total_length(w) / static_cast<double>(w.size());
        fmt::print("{},{},{:.1f}\n", k, w.size(), mean);
    }
    return kExitOk;
}

struct SimulateArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string output = "run";
};

int cmd_simulate(const SimulateArgs& a) {
    auto rc = load_run_config(a.config, a.overrides);
    const fs::path dir = a.output;
    fs::remove(dir / "manifest.json");
    fs::remove_all(dir / "checkpoints");
    fs::create_directories(dir / "checkpoints");

    rc.sim.checkpoint_dir = dir / "checkpoints";
    const auto res = rc.mode == RunMode::baseline ? run_baseline(rc.sim) : run(rc.sim);

    write_event_log(dir / "events.jsonl", res.log);
    write_checkpoint(dir / "checkpoints" / "initial.bin", res.initial_model);
    write_text(dir / "config.resolved", rc.canonical);
    std::ostringstream parts;
    res.partitions.write_csv(parts);
    write_text(dir / "partitions.csv", parts.str());

    std::vector<std::string> checkpoints;
    for (const auto& e : fs::directory_iterator(dir / "checkpoints"))
        checkpoints.push_back((fs::path("checkpoints") / e.path().filename()).generic_string());
    std::sort(checkpoints.begin(), checkpoints.end());

    const auto& last = res.log.rounds.empty() ? RoundRecord{} : res.log.rounds.back();
    json manifest = {
        {"tool_version", LTP_FLEO_VERSION},
        {"config_hash", rc.hash},
        {"seed", rc.sim.seed},
        {"mode", rc.mode == RunMode::baseline ? "baseline" : "ltp"},
        {"artifacts",
         {{"config", "config.resolved"},
          {"event_log", "events.jsonl"},
          {"partitions", "partitions.csv"},
          {"initial_model", "checkpoints/initial.bin"},
          {"final_model", "checkpoints/final.bin"},
          {"checkpoints", checkpoints}}},
        {"rounds", res.log.rounds.size()},
        {"aggregations", res.aggregations},
        {"simulated_hours", res.simulated_seconds / 3600.0},
    };
    if (last.accuracy) manifest["final_accuracy"] = *last.accuracy;
    if (last.loss) manifest["final_loss"] = *last.loss;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    fmt::print("{} rounds, {} aggregations, {:.2f} simulated hours\n", res.log.rounds.size(), res.aggregations,
               res.simulated_seconds / 3600.0);
    if (last.accuracy) fmt::print("final accuracy {:.4f}\n", *last.accuracy);
    fmt::print("config hash {}\nmanifest {}\n", rc.hash, (dir / "manifest.json").string());
    return kExitOk;
}

struct AuditArgs {
    std::string log;
    std::size_t L = 0;
    std::size_t window = 5;
    std::string colluders;
    bool expect_pass = false;
    std::string output;
};

int cmd_audit(const AuditArgs& a) {
    const auto log = load_log(a.log);
    const std::size_t L = a.L ? a.L : log.header.target_ltp;
    if (a.window == 0) throw UsageError("--window must be >= 1");
    const auto audit = ltp_verdict_over_run(log, L, a.window, Exec::parallel, parse_ids(a.colluders));
    const auto text = run_audit_to_json(audit);
    if (!a.output.empty()) write_text(a.output, text + "\n");
    print_audit_summary(audit, L);
    if (a.expect_pass && !audit.passed()) {
        fmt::print(stderr, "error: audit failed and --expect-pass was given\n");
        return kExitAssertion;
    }
    return kExitOk;
}

struct AnalyzeArgs {
    std::string log;
    std::string config;
    std::vector<std::string> overrides;
    std::string output;
};

struct AnalysisOutputs {
    FairnessReport fairness;
    std::optional<std::string> bound;
    std::optional<json> constants;
};

AnalysisOutputs analyze(const EventLog& log, const std::optional<RunConfig>& rc,
                        const std::optional<Params>& initial, const std::optional<Params>& final_model) {
    AnalysisOutputs out;
    out.fairness = fairness_gap(participation_from(log), log.rounds.size());
    if (!rc) return out;
    if (rc->hash != log.header.config_hash)
        warn(fmt::format("config hash {} differs from the event log's {}", rc->hash, log.header.config_hash));
    const auto& s = rc->sim;
    const auto data = prepare_data(s);
    if (final_model && s.loss.is_classifier()) add_confusion(out.fairness, s.loss, *final_model, data.holdout);
    if (bound_applies(s.loss)) {
        ConstantsOptions opt;
        if (s.loss.clip_radius) opt.clip_radius = *s.loss.clip_radius;
        opt.mini_batch = s.sgd.mini_batch;
        opt.seed = s.seed;
        const auto c = estimate_constants(s.loss, data.train, opt);
        const Params w1 = initial ? *initial : init_model(s.loss, derive_seed(s.seed, Stream::init_model));
        const auto p = make_bound_params(c, s.sgd.steps, s.constellation.num_satellites(), w1);
        out.bound = bound_csv(log, c, p, s.sgd.steps);
        out.constants = constants_json(c, p);
    }
    return out;
}

int cmd_analyze(const AnalyzeArgs& a) {
    const auto log = load_log(a.log);
    std::optional<RunConfig> rc;
    if (!a.config.empty()) rc = load_run_config(a.config, a.overrides);
    const auto out = analyze(log, rc, std::nullopt, std::nullopt);
    fmt::print("fairness gap over {} rounds: {}\n", out.fairness.rounds, out.fairness.gap);
    if (!a.output.empty()) {
        const fs::path dir = a.output;
        fs::create_directories(dir);
        json f = {{"rounds", out.fairness.rounds}, {"gap", out.fairness.gap}, {"rates", out.fairness.rates}};
        write_text(dir / "fairness.json", f.dump(2) + "\n");
        if (out.bound) write_text(dir / "bound.csv", *out.bound);
        if (out.constants) write_text(dir / "constants.json", out.constants->dump(2) + "\n");
    }
    if (rc && !out.bound) fmt::print("convergence bound: not applicable to {}\n", to_string(rc->sim.loss.kind));
    return kExitOk;
}

struct ReportArgs {
    std::string manifest;
    std::string output = "report";
    std::size_t window = 5;
};

int cmd_report(const ReportArgs& a) {
    const fs::path mpath = a.manifest;
    std::ifstream in(mpath);
    if (!in) throw UsageError(fmt::format("cannot open manifest {}", mpath.string()));
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError(fmt::format("{}: {}", mpath.string(), e.what()));
    }
    const fs::path run_dir = mpath.parent_path();
    const auto& art = manifest.at("artifacts");
    const auto resolve = [&](const char* key) { return run_dir / art.at(key).get<std::string>(); };

    const auto log = load_log(resolve("event_log"));
    const auto rc = load_run_config(resolve("config").string(), {});
    const auto initial = read_checkpoint(resolve("initial_model"));
    const auto final_model = read_checkpoint(resolve("final_model"));

    const fs::path dir = a.output;
    fs::create_directories(dir);
    fs::copy_file(resolve("event_log"), dir / "events.jsonl", fs::copy_options::overwrite_existing);

    const std::size_t L = log.header.target_ltp;
    const auto audit = ltp_verdict_over_run(log, L, a.window);
    write_text(dir / "leakage.json", run_audit_to_json(audit) + "\n");

    const auto out = analyze(log, rc, initial, final_model);
    write_text(dir / "bound.csv", out.bound ? *out.bound : std::string("round,aggregations,loss,gap,bound\n"));
    if (!out.fairness.confusion.empty()) write_text(dir / "confusion.csv", confusion_csv(out.fairness));

    std::string curve = "round,end_s,skipped,loss,accuracy\n";
    for (const auto& r : log.rounds)
        curve += fmt::format("{},{},{},{},{}\n", r.round, r.end_s, r.skipped ? 1 : 0,
                             r.loss ? fmt::format("{}", *r.loss) : "", r.accuracy ? fmt::format("{}", *r.accuracy) : "");
    write_text(dir / "curve.csv", curve);

    std::size_t failed = 0;
    for (const auto& w : audit.windows)
        if (w.verdict == Verdict::fail) ++failed;
    json report = {
        {"tool_version", LTP_FLEO_VERSION},
        {"config_hash", manifest.at("config_hash")},
        {"seed", manifest.at("seed")},
        {"mode", manifest.at("mode")},
        {"rounds", log.rounds.size()},
        {"aggregations", manifest.at("aggregations")},
        {"simulated_hours", manifest.at("simulated_hours")},
        {"audit",
         {{"L", L},
          {"window", a.window},
          {"windows", audit.windows.size()},
          {"failed_windows", failed},
          {"verdict", audit.passed() ? fmt::format("LTP-PASS({})", L) : std::string("LTP-FAIL")}}},
        {"fairness", {{"gap", out.fairness.gap}, {"rates", out.fairness.rates}}},
    };
    if (manifest.contains("final_accuracy")) report["final_accuracy"] = manifest["final_accuracy"];
    if (manifest.contains("final_loss")) report["final_loss"] = manifest["final_loss"];
    if (!out.fairness.per_class_accuracy.empty()) report["per_class_accuracy"] = out.fairness.per_class_accuracy;
    if (out.constants) report["constants"] = *out.constants;
    write_text(dir / "report.json", report.dump(2) + "\n");

    print_audit_summary(audit, L);
    fmt::print("fairness gap {}\nreport written to {}\n", out.fairness.gap, dir.string());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    configure_threads_from_env();

    CLI::App app{"LTP-FLEO: privacy-preserving federated learning over LEO constellations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", LTP_FLEO_VERSION);

    VisibilityArgs vis;
    auto* v = app.add_subcommand("visibility", "predict contact windows and write them as CSV");
    v->add_option("-c,--config", vis.config, "run configuration file");
    v->add_option("--set", vis.overrides, "override a field, section.key=value");
    v->add_option("-o,--output", vis.output, "schedule CSV path");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "run the training loop and write its artifacts");
    s->add_option("-c,--config", sim.config, "run configuration file");
    s->add_option("--set", sim.overrides, "override a field, section.key=value");
    s->add_option("-o,--output", sim.output, "output directory");

    AuditArgs aud;
    auto* au = app.add_subcommand("audit", "check an event log for linear leakage");
    au->add_option("--log", aud.log, "event log")->required();
    au->add_option("--L", aud.L, "guarantee to check (default: the log's target)");
    au->add_option("--window", aud.window, "rounds per audited window");
    au->add_option("--colluders", aud.colluders, "comma-separated satellite ids known to the server");
    au->add_flag("--expect-pass", aud.expect_pass, "exit 3 unless every window passes");
    au->add_option("-o,--output", aud.output, "leakage report JSON");

    AnalyzeArgs ana;
    auto* an = app.add_subcommand("analyze", "fairness and convergence-bound reports");
    an->add_option("--log", ana.log, "event log")->required();
    an->add_option("-c,--config", ana.config, "run configuration, enables the bound");
    an->add_option("--set", ana.overrides, "override a field, section.key=value");
    an->add_option("-o,--output", ana.output, "output directory");

    ReportArgs rep;
    auto* re = app.add_subcommand("report", "consolidate a simulate run into one directory");
    re->add_option("--manifest", rep.manifest, "manifest.json of a simulate run")->required();
    re->add_option("-o,--output", rep.output, "report directory");
    re->add_option("--window", rep.window, "rounds per audited window");

    auto* def = app.add_subcommand("config", "print the documented default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*v) return cmd_visibility(vis);
        if (*s) return cmd_simulate(sim);
        if (*au) return cmd_audit(aud);
        if (*an) return cmd_analyze(ana);
        if (*re) return cmd_report(rep);
        if (*def) {
            fmt::print("{}", default_config_text());
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitUsage;
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
