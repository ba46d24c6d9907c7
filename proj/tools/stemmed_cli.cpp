// Command-line front end: reproducible simulation, fitting, forecasting, and
// experiment runs driven by a declarative JSON config plus flag overrides.
// Exit codes: 0 success, 1 partial node failures, 2 invalid input.

#include <CLI11.hpp>
#include <json.hpp>

#include "stemmed/coop.hpp"
#include "stemmed/fit.hpp"
#include "stemmed/forecast.hpp"
#include "stemmed/io.hpp"
#include "stemmed/likelihood.hpp"
#include "stemmed/simulate.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

using nlohmann::json;
using namespace stemmed;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitInvalid = 2;

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& err) {
        throw InvalidInputError(std::string("config parse error: ") + err.what());
    }
    return doc;
}

void write_resolved_config(const json& resolved, const std::string& primary_output) {
    std::ofstream out(primary_output + ".config.json");
    if (!out) throw IoError("cannot write resolved config next to " + primary_output);
    out << resolved.dump(2) << "\n";
}

NodeParams node_params_from_json(const json& j) {
    NodeParams p;
    p.gamma = j.at("gamma").get<double>();
    p.beta = j.value("beta", std::vector<double>{});
    p.alpha = j.at("alpha").get<double>();
    p.delta_g = j.value("delta_g", 0.0);
    p.omega = j.value("omega", std::vector<double>{});
    p.delta_k = j.at("delta_k").get<double>();
    return p;
}

FitOptions fit_options_from_json(const json& cfg) {
    FitOptions opts;
    if (!cfg.contains("fit")) return opts;
    const json& j = cfg.at("fit");
    opts.max_iterations = j.value("max_iterations", opts.max_iterations);
    opts.relative_tolerance = j.value("relative_tolerance", opts.relative_tolerance);
    opts.initial_step = j.value("initial_step", opts.initial_step);
    opts.backtracking_factor = j.value("backtracking_factor", opts.backtracking_factor);
    opts.max_halvings = j.value("max_halvings", opts.max_halvings);
    opts.max_step_norm = j.value("max_step_norm", opts.max_step_norm);
    opts.multistart = j.value("multistart", opts.multistart);
    opts.seed = j.value("seed", opts.seed);
    opts.record_trace = j.value("record_trace", opts.record_trace);
    return opts;
}

ThetaMode theta_mode_from_json(const json& cfg) {
    const std::string mode = cfg.value("theta_mode", "dynamic");
    if (mode == "dynamic") return ThetaMode::Dynamic;
    if (mode == "always_one") return ThetaMode::AlwaysOne;
    if (mode == "self_only") return ThetaMode::SelfOnly;
    throw InvalidInputError("theta_mode must be dynamic | always_one | self_only");
}

// Network geometry + covariates, either from a scenario JSON or from
// distances/drugs (+ optional covariates) files.
struct LoadedContext {
    NetworkSpec spec;
    CovariateTracks tracks;
};

LoadedContext load_context(const json& cfg) {
    LoadedContext ctx;
    if (cfg.contains("scenario")) {
        const Scenario scenario = read_scenario_json(cfg.at("scenario").get<std::string>());
        ctx.spec = scenario.spec;
        ctx.tracks = scenario.tracks;
        return ctx;
    }
    if (!cfg.contains("distances") || !cfg.contains("drugs")) {
        throw InvalidInputError(
            "config needs either 'scenario' or both 'distances' and 'drugs'");
    }
    read_distances_file(cfg.at("distances").get<std::string>(), ctx.spec.communities,
                        ctx.spec.distances);
    ctx.spec.drugs = cfg.at("drugs").get<std::vector<std::string>>();
    ctx.spec.validate();
    if (cfg.contains("covariates")) {
        ctx.tracks = read_covariates_file(cfg.at("covariates").get<std::string>(), ctx.spec);
    }
    return ctx;
}

ModelVariant variant_from_name(const std::string& name) {
    if (name == "STEMMED") return ModelVariant::Stemmed;
    if (name == "SEPP") return ModelVariant::Sepp;
    if (name == "MEPP") return ModelVariant::Mepp;
    if (name == "CONST") return ModelVariant::Const;
    throw InvalidInputError("unknown variant '" + name + "'");
}

std::optional<ErrorInjection> injection_from_json(const json& cfg, const NetworkSpec& spec) {
    if (!cfg.contains("injection")) return std::nullopt;
    const json& j = cfg.at("injection");
    ErrorInjection injection;
    injection.window_start = j.at("window_start").get<double>();
    injection.window_end = j.at("window_end").get<double>();
    injection.feature_shift = j.value("feature_shift", 0.0);
    injection.remove_nodes = j.value("remove_nodes", std::vector<int>{});
    injection.modify_nodes = j.value("modify_nodes", std::vector<int>{});
    for (const json& je : j.value("additions", json::array())) {
        Event e;
        e.time = je.at("time").get<double>();
        e.node.community = je.at("community").get<int>();
        e.node.drug = je.at("drug").get<int>();
        e.features = je.value("features", std::vector<double>{});
        e.drugs_involved = je.value("drugs_involved", std::vector<int>{});
        e.drugs_involved.push_back(e.node.drug);
        if (!spec.contains(e.node)) throw InvalidInputError("injection node outside network");
        injection.additions.push_back(std::move(e));
    }
    return injection;
}

int cmd_simulate(const json& cfg) {
    const uint64_t seed = cfg.value("seed", 1ULL);
    const double horizon = cfg.value("horizon", 101.0);
    const std::string out_events = cfg.at("out_events").get<std::string>();

    Scenario scenario;
    if (cfg.contains("scenario_in")) {
        scenario = read_scenario_json(cfg.at("scenario_in").get<std::string>());
        scenario.seed = cfg.value("seed", scenario.seed);
    } else {
        const int n_nodes = cfg.value("n_nodes", 1);
        const int p = cfg.value("p", 1);
        const int q = cfg.value("q", 1);
        scenario = build_scenario(n_nodes, std::max(horizon, 1.0), seed, p, q);
        scenario.horizon = horizon;
    }
    if (cfg.contains("gt_params")) {
        scenario.params.nodes.at(0) = node_params_from_json(cfg.at("gt_params"));
    }

    EventDatabase db(scenario.spec);
    if (horizon > 0.0) db = thinning_simulate(scenario, 0.0, horizon);
    write_events_file(out_events, scenario.spec, db);
    if (cfg.contains("out_scenario")) {
        write_scenario_json(cfg.at("out_scenario").get<std::string>(), scenario);
    }
    if (cfg.contains("out_covariates")) {
        write_covariates_file(cfg.at("out_covariates").get<std::string>(), scenario.spec,
                              scenario.tracks);
    }
    if (cfg.contains("out_distances")) {
        write_distances_file(cfg.at("out_distances").get<std::string>(), scenario.spec);
    }
    write_resolved_config(cfg, out_events);
    std::printf("simulate: %zu events -> %s\n", db.total_events(), out_events.c_str());
    return kExitOk;
}

int cmd_fit(const json& cfg) {
    const LoadedContext ctx = load_context(cfg);
    const EventDatabase db =
        read_events_file(cfg.at("events").get<std::string>(), ctx.spec);
    const double horizon = cfg.value("horizon", db.last_event_time());
    if (!(horizon > 0.0)) throw InvalidInputError("fit: horizon must be positive");
    const ThetaMode theta_mode = theta_mode_from_json(cfg);
    FitOptions opts = fit_options_from_json(cfg);
    opts.record_trace = opts.record_trace || cfg.contains("out_trace");

    const int p = ctx.tracks.tracks.empty() ? 0 : ctx.tracks.tracks.front().dim();
    const int q = db.total_events() == 0
                      ? cfg.value("q", 0)
                      : static_cast<int>(db.global_events().front().features.size());

    const json init_cfg = cfg.value("init", json::object());
    const std::string init_mode = init_cfg.value("mode", "sample");
    const uint64_t init_seed = init_cfg.value("seed", 1ULL);

    const int n = ctx.spec.n_nodes();
    std::vector<NodeParams> inits;
    inits.reserve(static_cast<std::size_t>(n));
    for (int ui = 0; ui < n; ++ui) {
        const uint64_t node_seed = derive_seed(init_seed, static_cast<uint64_t>(ui));
        if (init_mode == "sample") {
            inits.push_back(sample_init(node_seed, p, q));
        } else if (init_mode == "grid") {
            inits.push_back(grid_init(ctx.spec.node_at(ui), db, ctx.spec, ctx.tracks,
                                      horizon, default_init_grid(), node_seed, p, q,
                                      theta_mode));
        } else {
            throw InvalidInputError("init.mode must be sample | grid");
        }
    }

    const int workers = cfg.value(
        "workers", static_cast<int>(std::thread::hardware_concurrency()));
    const std::vector<double> horizons(static_cast<std::size_t>(n), horizon);
    const auto fits = fit_network(db, ctx.spec, ctx.tracks, horizons, inits, opts,
                                  theta_mode, std::max(workers, 1));

    NetworkParams fitted;
    int failures = 0;
    for (const auto& fit : fits) {
        fitted.nodes.push_back(fit.params);
        if (!fit.ok) {
            ++failures;
            std::fprintf(stderr, "fit: node failure: %s\n", fit.error.c_str());
        }
    }
    const std::string out_params = cfg.at("out_params").get<std::string>();
    write_params_json(out_params, ctx.spec, fitted);
    if (cfg.contains("out_trace")) {
        write_trace_csv(cfg.at("out_trace").get<std::string>(), ctx.spec, fits);
    }
    write_resolved_config(cfg, out_params);
    std::printf("fit: %d nodes, %d failures -> %s\n", n, failures, out_params.c_str());
    return failures == 0 ? kExitOk : kExitPartial;
}

int cmd_forecast(const json& cfg) {
    const LoadedContext ctx = load_context(cfg);
    const EventDatabase db =
        read_events_file(cfg.at("events").get<std::string>(), ctx.spec);
    const NetworkParams params =
        read_params_json(cfg.at("params").get<std::string>(), ctx.spec);
    const ModelView view{&ctx.spec, &params, &ctx.tracks, theta_mode_from_json(cfg)};

    const double start = cfg.value("start", db.last_event_time());
    ForecastConfig config;
    config.bin_width = cfg.value("bin_width", 1.0);
    if (cfg.contains("bins")) {
        config.horizon = start + cfg.at("bins").get<int>() * config.bin_width;
    } else {
        config.horizon = cfg.at("horizon").get<double>();
    }
    config.n_sample_paths = cfg.value("paths", 0);
    config.seed = cfg.value("seed", 0ULL);
    config.update_theta_with_synthetic = cfg.value("update_theta", true);

    const ForecastResult result = multi_period_predict(db, view, config, start);
    const std::string out = cfg.at("out").get<std::string>();
    write_forecast_csv(out, ctx.spec, result);
    write_resolved_config(cfg, out);
    std::printf("forecast: %zu bins x %d nodes -> %s%s\n", result.bin_start.size(),
                ctx.spec.n_nodes(), out.c_str(),
                result.expected_mode_approximation ? " (expected-value mode)" : "");
    return kExitOk;
}

int cmd_recover(const json& cfg) {
    const int n_nodes = cfg.value("n_nodes", 1);
    const int replications = cfg.value("replications", 100);
    if (replications < 1) throw InvalidInputError("recover: replications must be >= 1");
    const std::vector<double> cutoffs =
        cfg.value("cutoffs", std::vector<double>{50.0, 100.0});
    const uint64_t seed = cfg.value("seed", 1ULL);
    const NodeParams gt =
        cfg.contains("gt") ? node_params_from_json(cfg.at("gt"))
                           : NodeParams{0.77, {0.8}, 1.45, 8.82, {0.85}, 14.66};

    FitOptions opts = recovery_fit_options();
    if (cfg.contains("fit")) opts = fit_options_from_json(cfg);

    const RecoveryReport report =
        recovery_experiment(n_nodes, cutoffs, replications, gt, seed, opts);
    const std::string out = cfg.at("out").get<std::string>();
    write_recovery_csv(out, report);
    write_resolved_config(cfg, out);
    int failures = 0;
    for (const auto& cell : report.cells) failures += cell.n_failed;
    std::printf("recover: %d nodes x %zu cutoffs x %d reps, %d fit failures -> %s\n",
                n_nodes, cutoffs.size(), replications, failures, out.c_str());
    return failures == 0 ? kExitOk : kExitPartial;
}

int cmd_coop(const json& cfg) {
    Scenario scenario;
    EventDatabase truth;
    if (cfg.contains("scenario")) {
        scenario = read_scenario_json(cfg.at("scenario").get<std::string>());
    } else {
        const json& gen = cfg.at("generator");
        scenario = build_scenario(gen.at("n_nodes").get<int>(),
                                  gen.at("horizon").get<double>(),
                                  gen.value("seed", 1ULL));
    }
    if (cfg.contains("events")) {
        truth = read_events_file(cfg.at("events").get<std::string>(), scenario.spec);
    } else {
        truth = thinning_simulate(scenario, 0.0, scenario.horizon);
    }

    const json& js = cfg.at("schedule");
    CoopSchedule schedule;
    schedule.start = js.at("start").get<double>();
    schedule.end = js.at("end").get<double>();
    schedule.upload_period = js.value("upload_period", 1.0);
    schedule.refresh_period = js.value("refresh_period", 3.0);
    schedule.horizons = js.value("horizons", std::vector<int>{1, 3, 6, 9, 12});
    schedule.bin_width = js.value("bin_width", 1.0);
    schedule.forecast_paths = js.value("forecast_paths", 0);

    std::vector<std::string> variant_names =
        cfg.value("variants", std::vector<std::string>{"STEMMED", "SEPP", "MEPP", "CONST"});
    const FitOptions opts = fit_options_from_json(cfg);
    const uint64_t seed = cfg.value("seed", 1ULL);
    const auto injection = injection_from_json(cfg, scenario.spec);

    std::vector<EvalRecord> all_records;
    int refit_failures = 0;
    for (const auto& name : variant_names) {
        const ModelVariant variant = variant_from_name(name);
        const OnlineRunResult run = run_online(truth, scenario.spec, scenario.tracks,
                                               variant, schedule, opts, seed, injection);
        refit_failures += run.refit_failures;
        all_records.insert(all_records.end(), run.log.begin(), run.log.end());
        std::printf("coop: %s issued %zu forecasts (%d refits, %d failures)\n",
                    name.c_str(), run.log.size(), run.refits, run.refit_failures);
    }

    const std::string out_log = cfg.at("out_log").get<std::string>();
    write_eval_log_csv(out_log, scenario.spec, all_records);
    if (cfg.contains("out_mspe")) {
        const auto rows = mspe(all_records, scenario.spec, cfg.value("mspe_by_drug", true));
        write_mspe_csv(cfg.at("out_mspe").get<std::string>(), rows);
    }
    write_resolved_config(cfg, out_log);
    return refit_failures == 0 ? kExitOk : kExitPartial;
}

int cmd_inspect(const json& cfg) {
    const LoadedContext ctx = load_context(cfg);
    const EventDatabase db =
        read_events_file(cfg.at("events").get<std::string>(), ctx.spec);
    const NetworkParams params =
        read_params_json(cfg.at("params").get<std::string>(), ctx.spec);
    const std::vector<double> times = cfg.at("times").get<std::vector<double>>();
    for (double t : times) {
        if (t < 0.0 || t > db.last_event_time()) {
            throw InvalidInputError("inspect: requested time outside the history span");
        }
    }
    const std::string out = cfg.at("out").get<std::string>();
    write_arcs_csv(out, ctx.spec, params, db, times);
    write_resolved_config(cfg, out);
    std::printf("inspect: %zu time points -> %s\n", times.size(), out.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"STEMMED point-process engine"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed_override = 0;
    bool has_seed_override = false;
    int workers_override = 0;
    std::string out_override;
    double horizon_override = 0.0;
    bool has_horizon_override = false;
    int replications_override = 0;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed_override, "override config seed")
            ->each([&](const std::string&) { has_seed_override = true; });
        sub->add_option("--workers", workers_override, "override worker count");
        sub->add_option("--out", out_override, "override primary output path");
        sub->add_option("--horizon", horizon_override, "override horizon")
            ->each([&](const std::string&) { has_horizon_override = true; });
        sub->add_option("--replications", replications_override,
                        "override replication count");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "simulate a scenario to events");
    CLI::App* fit = app.add_subcommand("fit", "fit per-node parameters from files");
    CLI::App* forecast = app.add_subcommand("forecast", "multi-period bin forecasts");
    CLI::App* recover = app.add_subcommand("recover", "parameter-recovery experiment");
    CLI::App* coop = app.add_subcommand("coop", "online cooperative forecasting runs");
    CLI::App* inspect = app.add_subcommand("inspect", "arc weight matrices over time");
    for (CLI::App* sub : {simulate, fit, forecast, recover, coop, inspect}) {
        add_common(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = load_config(config_path);
        if (has_seed_override) cfg["seed"] = seed_override;
        if (workers_override > 0) cfg["workers"] = workers_override;
        if (has_horizon_override) cfg["horizon"] = horizon_override;
        if (replications_override > 0) cfg["replications"] = replications_override;
        if (!out_override.empty()) {
            for (const char* key : {"out_events", "out_params", "out", "out_log"}) {
                if (cfg.contains(key)) {
                    cfg[key] = out_override;
                    break;
                }
            }
        }

        if (simulate->parsed()) return cmd_simulate(cfg);
        if (fit->parsed()) return cmd_fit(cfg);
        if (forecast->parsed()) return cmd_forecast(cfg);
        if (recover->parsed()) return cmd_recover(cfg);
        if (coop->parsed()) return cmd_coop(cfg);
        if (inspect->parsed()) return cmd_inspect(cfg);
    } catch (const InvalidInputError& err) {
        std::fprintf(stderr, "invalid input: %s\n", err.what());
        return kExitInvalid;
    } catch (const IoError& err) {
        std::fprintf(stderr, "io error: %s\n", err.what());
        return kExitInvalid;
    } catch (const OverflowGuardError& err) {
        std::fprintf(stderr, "numeric guard: %s\n", err.what());
        return kExitInvalid;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return kExitInvalid;
    }
    return kExitInvalid;
}
