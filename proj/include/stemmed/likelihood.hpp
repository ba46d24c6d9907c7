#pragma once

#include "stemmed/model.hpp"
#include "stemmed/types.hpp"

#include <vector>

namespace stemmed {

// Layout of the reparameterized vector (log gamma, beta, log alpha,
// log delta_g, omega, log delta_k), length p + q + 4.
struct ParamLayout {
    int p{0};
    int q{0};

    int size() const { return p + q + 4; }
    int log_gamma() const { return 0; }
    int beta(int j) const { return 1 + j; }
    int log_alpha() const { return 1 + p; }
    int log_delta_g() const { return 2 + p; }
    int omega(int j) const { return 3 + p + j; }
    int log_delta_k() const { return 3 + p + q; }
};

std::vector<double> pack_params(const NodeParams& params);
NodeParams unpack_params(const std::vector<double>& packed, const ParamLayout& layout);

struct NodeLoglik {
    double value{0.0};
    double event_log_sum{0.0};
    double compensator{0.0};
    std::vector<double> gradient; // reparameterized; empty unless requested
};

// Per-node log-likelihood over [0, horizon]; one left-to-right sweep over the
// merged grid of event times, covariate breakpoints, and the horizon.
NodeLoglik node_loglik_detail(NodeId u, const NodeParams& params_u, const ModelView& view,
                              const Snapshot& snap, double horizon, bool want_gradient);

double node_loglik(NodeId u, const NodeParams& params_u, const ModelView& view,
                   const Snapshot& snap, double horizon);

std::vector<double> node_loglik_grad(NodeId u, const NodeParams& params_u,
                                     const ModelView& view, const Snapshot& snap,
                                     double horizon);

// Integrated intensity of node u over [0, T].
double compensator(NodeId u, double T, const ModelView& view, const Snapshot& snap);

// Sum of per-node log-likelihoods, in node-index order.
double total_loglik(const ModelView& view, const EventDatabase& db,
                    const std::vector<double>& horizons);

} // namespace stemmed
