#pragma once

#include "stemmed/likelihood.hpp"
#include "stemmed/model.hpp"
#include "stemmed/types.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace stemmed {

// Parameter blocks held fixed during fitting (restricted model variants).
struct ParamMask {
    bool gamma{true};
    bool beta{true};
    bool alpha{true};
    bool delta_g{true};
    bool omega{true};
    bool delta_k{true};
};

struct FitOptions {
    int max_iterations{5000};
    double relative_tolerance{1e-6}; // on log-likelihood change
    double initial_step{0.1};
    double backtracking_factor{0.5};
    int max_halvings{60};
    double armijo_c1{1e-4};
    // Trust radius: per-iteration movement cap on the packed parameter
    // vector (infinity = plain backtracking).
    double max_step_norm{std::numeric_limits<double>::infinity()};
    uint64_t seed{0};
    int multistart{1}; // > 1: extra sampled starts, best objective wins
    bool record_trace{false};
    ParamMask mask{};
};

struct FitResult {
    NodeParams params;
    double loglik{0.0};
    int iterations{0};
    bool converged{false};
    bool ok{true};
    std::string error;
    std::vector<std::pair<int, double>> trace; // (iteration, log-likelihood)
};

// Gradient ascent with backtracking line search on the reparameterized
// objective. Throws InvalidInputError when the objective is non-finite at
// the init; a stalled line search returns converged == false instead.
FitResult fit_node(NodeId u, const EventDatabase& db, const NetworkSpec& spec,
                   const CovariateTracks& tracks, double horizon, const NodeParams& init,
                   const FitOptions& opts, ThetaMode theta_mode = ThetaMode::Dynamic);

// Node-by-node fits; per-node errors are collected, not fail-fast. Results
// are identical whether nodes run sequentially or on `workers` threads.
std::vector<FitResult> fit_network(const EventDatabase& db, const NetworkSpec& spec,
                                   const CovariateTracks& tracks,
                                   const std::vector<double>& horizons,
                                   const std::vector<NodeParams>& inits,
                                   const FitOptions& opts,
                                   ThetaMode theta_mode = ThetaMode::Dynamic,
                                   int workers = 1);

// gamma, beta ~ U(0,1); alpha ~ U(1,2); delta_g ~ U(6,18); omega ~ U(0,1);
// delta_k ~ U(10,30). Deterministic per seed.
NodeParams sample_init(uint64_t seed, int p, int q);

struct InitGridPoint {
    double alpha{0.0};
    double delta_k{1.0};
    double delta_g{0.0};
};

// Candidate (alpha, delta_k, delta_g) triples; contains (30, 5, 5).
std::vector<InitGridPoint> default_init_grid();

// Highest node log-likelihood over the candidate grid, with gamma, beta,
// omega drawn once from U(0,1).
NodeParams grid_init(NodeId u, const EventDatabase& db, const NetworkSpec& spec,
                     const CovariateTracks& tracks, double horizon,
                     const std::vector<InitGridPoint>& grid, uint64_t seed, int p, int q,
                     ThetaMode theta_mode = ThetaMode::Dynamic);

} // namespace stemmed
