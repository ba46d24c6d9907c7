#pragma once

#include "stemmed/model.hpp"
#include "stemmed/types.hpp"

#include <cstdint>
#include <vector>

namespace stemmed {

struct ForecastConfig {
    double bin_width{1.0}; // A
    double horizon{0.0};   // absolute end time T; must exceed the start
    int n_sample_paths{0}; // 0 = expected-value mode
    uint64_t seed{0};
    // When false, social connectivity stays at its forecast-start value even
    // as synthetic events accumulate.
    bool update_theta_with_synthetic{true};

    void validate(double start) const;
};

struct ForecastResult {
    double start{0.0};
    double bin_width{0.0};
    std::vector<double> bin_start;                      // per bin
    std::vector<std::vector<double>> expected;          // [bin][node]
    std::vector<std::vector<std::vector<int>>> sampled; // [path][bin][node]
    // Expected-value mode propagates expected counts by scaling triggering
    // mass instead of sampling events; marked because that is approximate.
    bool expected_mode_approximation{false};
};

// A resampled mark: feature vector plus involved-drug set.
struct Mark {
    std::vector<double> features;
    std::vector<int> drugs;
};

// Integrated intensity of node u over (t, t+A] with covariates and social
// connectivity frozen at their time-t values.
double bin_integral(NodeId u, double t, double bin_width, const ModelView& view,
                    const EventDatabase& working_db);

// Discretized multi-period prediction: per bin and node, counts are Poisson
// with the frozen-covariate bin integral; sampled synthetic events land at
// the bin end and feed later bins.
ForecastResult multi_period_predict(const EventDatabase& db, const ModelView& view,
                                    const ForecastConfig& config, double start);

// Marks resampled uniformly with replacement from node u's history, falling
// back to the community pool and then the global pool. The node's own drug is
// always included in the returned drug sets.
std::vector<Mark> sample_marks(NodeId u, const EventDatabase& db, int count, uint64_t seed);

} // namespace stemmed
