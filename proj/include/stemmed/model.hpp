#pragma once

#include "stemmed/types.hpp"

#include <span>
#include <vector>

namespace stemmed {

// Arc connectivity regimes. Dynamic is the full data-driven form; the other
// two realize restricted baseline models on the same engine.
enum class ThetaMode {
    Dynamic,   // event-history fraction with add-one smoothing
    AlwaysOne, // theta == 1 for every pair (static arcs)
    SelfOnly,  // theta == 1 for u==v, 0 otherwise (no cross-excitation)
};

// Everything needed to evaluate intensities for a network.
struct ModelView {
    const NetworkSpec* spec{nullptr};
    const NetworkParams* params{nullptr};
    const CovariateTracks* tracks{nullptr}; // may be null/empty (p == 0)
    ThetaMode theta_mode{ThetaMode::Dynamic};

    const NodeParams& node_params(int node_index) const {
        return params->nodes.at(static_cast<std::size_t>(node_index));
    }
    const CovariateTrack* node_track(int node_index) const {
        return tracks == nullptr ? nullptr : tracks->track_for(node_index);
    }
};

// exp with the +-700 argument guard; out-of-range throws OverflowGuardError.
double guarded_exp(double x);

double baseline_rate(const NodeParams& params, const CovariateTrack* track, double t);
double temporal_kernel(double delta_k, double dt);
double mark_gain(std::span<const double> omega, std::span<const double> features);
double spatial_gain(double delta_g, double dist);

// Incremental event counters behind social connectivity. Feeding events in
// time order reproduces exactly the per-snapshot recomputation.
class ConnectivityCounter {
public:
    ConnectivityCounter() = default;
    ConnectivityCounter(int n_communities, int n_drugs);

    void add(const Event& e);
    double theta(NodeId u, NodeId v) const;

    static ConnectivityCounter from_snapshot(const NetworkSpec& spec, const Snapshot& snap);

private:
    std::size_t pair_index(int community, int drug_a, int drug_b) const;

    int n_drugs_{0};
    std::vector<long long> community_counts_;
    std::vector<long long> pair_counts_; // per community, upper-triangular drug pairs
};

double social_connectivity(NodeId u, NodeId v, double t, const NetworkSpec& spec,
                           const Snapshot& snap);

double arc_weight(const NodeParams& params_u, NodeId u, NodeId v, double t,
                  const NetworkSpec& spec, const Snapshot& snap);

// Conditional intensity of node u at time t given the events in `snap` that
// are strictly earlier than t.
double intensity(NodeId u, double t, const ModelView& view, const Snapshot& snap);

// Intensities of every node at t (shared history scan).
std::vector<double> all_intensities(double t, const ModelView& view, const Snapshot& snap);

} // namespace stemmed
