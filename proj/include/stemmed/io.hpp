#pragma once

#include "stemmed/coop.hpp"
#include "stemmed/forecast.hpp"
#include "stemmed/simulate.hpp"
#include "stemmed/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace stemmed {

// Plain-text schemas, one versioned header line each. Column layouts are
// documented in the README; '.' decimal separator throughout.

struct Dataset {
    NetworkSpec spec;
    EventDatabase db;
    CovariateTracks tracks;
};

void write_events_file(const std::string& path, const NetworkSpec& spec,
                       const EventDatabase& db);
EventDatabase read_events_file(const std::string& path, const NetworkSpec& spec);

void write_covariates_file(const std::string& path, const NetworkSpec& spec,
                           const CovariateTracks& tracks);
CovariateTracks read_covariates_file(const std::string& path, const NetworkSpec& spec);

void write_distances_file(const std::string& path, const NetworkSpec& spec);
// Returns community labels + distance matrix; drug labels come from events.
void read_distances_file(const std::string& path, std::vector<std::string>& communities,
                         std::vector<std::vector<double>>& distances);

// Drug labels are collected from the events file when no distances/covariates
// mention them; the scenario JSON carries everything.
void write_scenario_json(const std::string& path, const Scenario& scenario);
Scenario read_scenario_json(const std::string& path);

void write_params_json(const std::string& path, const NetworkSpec& spec,
                       const NetworkParams& params);
NetworkParams read_params_json(const std::string& path, const NetworkSpec& spec);

void write_forecast_csv(const std::string& path, const NetworkSpec& spec,
                        const ForecastResult& forecast);

void write_recovery_csv(const std::string& path, const RecoveryReport& report);

void write_eval_log_csv(const std::string& path, const NetworkSpec& spec,
                        const std::vector<EvalRecord>& log);

void write_mspe_csv(const std::string& path, const std::vector<MspeRow>& rows);

void write_arcs_csv(const std::string& path, const NetworkSpec& spec,
                    const NetworkParams& params, const EventDatabase& db,
                    const std::vector<double>& times);

void write_trace_csv(const std::string& path, const NetworkSpec& spec,
                     const std::vector<FitResult>& fits);

std::string format_double(double value);

} // namespace stemmed
