#pragma once

#include "stemmed/fit.hpp"
#include "stemmed/forecast.hpp"
#include "stemmed/model.hpp"
#include "stemmed/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stemmed {

// STEMMED plus the restricted configurations used as baselines; all run on
// the same engine via parameter masks and connectivity modes.
enum class ModelVariant { Stemmed, Sepp, Mepp, Const };

std::string variant_name(ModelVariant variant);
ThetaMode variant_theta_mode(ModelVariant variant);

struct CoopSchedule {
    double start{0.0};          // initial training span is [0, start]
    double end{0.0};            // last time with observed data
    double upload_period{1.0};  // n
    double refresh_period{3.0}; // M, with 0 < n <= M
    std::vector<int> horizons{1, 3, 6, 9, 12}; // in bins ahead of the issue time
    double bin_width{1.0};
    int forecast_paths{0}; // 0 = deterministic expected-value forecasts

    void validate() const;
};

struct EvalRecord {
    ModelVariant variant{ModelVariant::Stemmed};
    int node{0};
    double issue_time{0.0};
    int horizon{0};
    double predicted{0.0};
    double realized{0.0};
    bool model_fresh{true}; // last scheduled refit succeeded
};

struct OnlineRunResult {
    std::vector<EvalRecord> log;
    int refits{0};
    int refit_failures{0};
};

// Deliberate data-quality faults confined to a time window.
struct ErrorInjection {
    double window_start{0.0};
    double window_end{0.0};
    std::vector<Event> additions;    // must lie inside the window
    std::vector<int> remove_nodes;   // drop these nodes' events inside the window
    std::vector<int> modify_nodes;   // shift features of these nodes' window events
    double feature_shift{0.0};

    void validate() const;
};

// Copy of db differing only inside the injection window; original untouched.
EventDatabase inject_errors(const EventDatabase& db, const ErrorInjection& injection);

// Online loop per the cooperative framework: refit every refresh period on
// the clean store, ingest uploads every upload period, and issue forecasts at
// each horizon. A corruption, when given, affects only forecast issuance
// while the issue time is inside its window; refits always see clean data.
OnlineRunResult run_online(const EventDatabase& truth, const NetworkSpec& spec,
                           const CovariateTracks& tracks, ModelVariant variant,
                           const CoopSchedule& schedule, const FitOptions& fit_opts,
                           uint64_t seed,
                           const std::optional<ErrorInjection>& corruption = std::nullopt);

struct MspeRow {
    std::string variant;
    int horizon{0};
    std::string group; // drug label, or "all"
    double mspe{0.0};
    long long n{0};
};

std::vector<MspeRow> mspe(const std::vector<EvalRecord>& log, const NetworkSpec& spec,
                          bool by_drug);

// Where two databases are declared to disagree.
struct DiscrepancyScope {
    enum class Kind { TimeWindow, SingleNode };
    Kind kind{Kind::TimeWindow};
    double window_start{0.0};
    double window_end{0.0};
    int node{-1};
};

struct RobustnessProbe {
    double tau{0.0};
    double gap{0.0};
};

// |lambda_u under db1 - lambda_u under db2| at the probe times, after
// verifying that the databases differ only within the declared scope.
std::vector<RobustnessProbe> robustness_decay(NodeId u, const ModelView& view,
                                              const EventDatabase& db1,
                                              const EventDatabase& db2,
                                              const std::vector<double>& probe_times,
                                              const DiscrepancyScope& scope);

} // namespace stemmed
