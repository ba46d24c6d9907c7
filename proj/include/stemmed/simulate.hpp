#pragma once

#include "stemmed/fit.hpp"
#include "stemmed/model.hpp"
#include "stemmed/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stemmed {

// How synthetic marks are produced: iid U(0,1) features, plus the node's own
// drug with each other drug joining independently.
struct MarkModel {
    int n_features{1};
    double co_drug_prob{0.2};
};

struct Scenario {
    NetworkSpec spec;
    CovariateTracks tracks;
    NetworkParams params;
    MarkModel marks;
    double horizon{101.0};
    uint64_t seed{0};

    ModelView view() const { return ModelView{&spec, &params, &tracks, ThetaMode::Dynamic}; }
    void validate() const;
};

// Communities uniform in the unit square (Euclidean distances), node grid =
// near-square communities x drugs factorization, params via sample_init,
// per-node covariate tracks stepping at unit times. Deterministic per seed.
Scenario build_scenario(int n_nodes, double horizon, uint64_t seed, int p = 1, int q = 1);

// Exact continuous-time simulation by thinning on [t_start, t_end]. The
// dominating rate is the intensity just after the segment start; proposal
// segments are split at covariate breakpoints, where the baseline may jump.
EventDatabase thinning_simulate(const Scenario& scenario, double t_start, double t_end,
                                const EventDatabase* existing = nullptr);

struct RecoveryCell {
    int n_nodes{0};
    double cutoff{0.0};
    std::vector<std::string> param_names;
    std::vector<double> mean;
    std::vector<double> p2_5;
    std::vector<double> p97_5;
    std::vector<std::vector<double>> estimates; // [replication][param], successes only
    int n_failed{0};
};

struct RecoveryReport {
    NodeParams ground_truth;
    std::vector<RecoveryCell> cells; // one per cutoff
};

// Fit options for the recovery runs: tight stopping so estimates reach the
// per-replication optimum instead of stalling near their inits.
FitOptions recovery_fit_options();

// Parameter-recovery experiment: per replication, build a scenario, force the
// first node's params to `gt`, simulate to T = 101, fit that node at each
// cutoff from a fresh sampled init.
RecoveryReport recovery_experiment(int n_nodes, const std::vector<double>& cutoffs,
                                   int replications, const NodeParams& gt, uint64_t seed,
                                   const FitOptions& opts = recovery_fit_options());

double empirical_quantile(std::vector<double> values, double q);

} // namespace stemmed
