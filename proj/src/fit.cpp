#include "stemmed/fit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>

namespace stemmed {

namespace {

constexpr double kLogFloor = -20.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void apply_floors(std::vector<double>& packed, const ParamLayout& layout) {
    packed[layout.log_alpha()] = std::max(packed[layout.log_alpha()], kLogFloor);
    packed[layout.log_delta_g()] = std::max(packed[layout.log_delta_g()], kLogFloor);
}

void apply_mask(std::vector<double>& grad, const ParamLayout& layout, const ParamMask& mask) {
    if (!mask.gamma) grad[layout.log_gamma()] = 0.0;
    if (!mask.beta) {
        for (int j = 0; j < layout.p; ++j) grad[layout.beta(j)] = 0.0;
    }
    if (!mask.alpha) grad[layout.log_alpha()] = 0.0;
    if (!mask.delta_g) grad[layout.log_delta_g()] = 0.0;
    if (!mask.omega) {
        for (int j = 0; j < layout.q; ++j) grad[layout.omega(j)] = 0.0;
    }
    if (!mask.delta_k) grad[layout.log_delta_k()] = 0.0;
}

struct Objective {
    NodeId node;
    const ModelView* view;
    const Snapshot* snap;
    double horizon;
    ParamLayout layout;

    // Non-finite and guard failures become -inf so the line search backs off.
    double value(const std::vector<double>& packed) const {
        try {
            const NodeParams params = unpack_params(packed, layout);
            const double v = node_loglik(node, params, *view, *snap, horizon);
            return std::isfinite(v) ? v : kNegInf;
        } catch (const OverflowGuardError&) {
            return kNegInf;
        } catch (const NumericDegenerateError&) {
            return kNegInf;
        }
    }

    NodeLoglik value_and_grad(const std::vector<double>& packed) const {
        const NodeParams params = unpack_params(packed, layout);
        return node_loglik_detail(node, params, *view, *snap, horizon, true);
    }
};

FitResult ascend(const Objective& objective, const NodeParams& init, const FitOptions& opts) {
    const ParamLayout& layout = objective.layout;
    std::vector<double> x = pack_params(init);
    apply_floors(x, layout);

    FitResult result;
    NodeLoglik current = objective.value_and_grad(x);
    if (!std::isfinite(current.value)) {
        throw InvalidInputError("fit_node: objective is non-finite at the initial parameters");
    }
    apply_mask(current.gradient, layout, opts.mask);
    if (opts.record_trace) result.trace.emplace_back(0, current.value);

    std::vector<double> candidate(x.size());
    bool converged = false;
    int iter = 0;
    for (iter = 1; iter <= opts.max_iterations; ++iter) {
        double grad_sq = 0.0;
        for (double g : current.gradient) grad_sq += g * g;
        if (grad_sq == 0.0) {
            converged = true;
            break;
        }

        bool accepted = false;
        double step = opts.initial_step;
        if (std::isfinite(opts.max_step_norm)) {
            const double move = step * std::sqrt(grad_sq);
            if (move > opts.max_step_norm) step = opts.max_step_norm / std::sqrt(grad_sq);
        }
        double f_new = kNegInf;
        for (int halving = 0; halving <= opts.max_halvings; ++halving) {
            for (std::size_t i = 0; i < x.size(); ++i) {
                candidate[i] = x[i] + step * current.gradient[i];
            }
            apply_floors(candidate, layout);
            f_new = objective.value(candidate);
            if (f_new >= current.value + opts.armijo_c1 * step * grad_sq) {
                accepted = true;
                break;
            }
            step *= opts.backtracking_factor;
        }
        if (!accepted) break; // stalled

        const double change = f_new - current.value;
        x = candidate;
        current = objective.value_and_grad(x);
        apply_mask(current.gradient, layout, opts.mask);
        if (opts.record_trace) result.trace.emplace_back(iter, current.value);

        if (change / std::max(1.0, std::abs(current.value)) < opts.relative_tolerance) {
            converged = true;
            break;
        }
    }

    result.params = unpack_params(x, layout);
    result.loglik = current.value;
    result.iterations = std::min(iter, opts.max_iterations);
    result.converged = converged;
    return result;
}

} // namespace

FitResult fit_node(NodeId u, const EventDatabase& db, const NetworkSpec& spec,
                   const CovariateTracks& tracks, double horizon, const NodeParams& init,
                   const FitOptions& opts, ThetaMode theta_mode) {
    const ModelView view{&spec, nullptr, &tracks, theta_mode};
    const Snapshot snap = db.snapshot_through(horizon);
    const ParamLayout layout{static_cast<int>(init.beta.size()),
                             static_cast<int>(init.omega.size())};
    const Objective objective{u, &view, &snap, horizon, layout};

    FitResult best = ascend(objective, init, opts);
    for (int s = 1; s < opts.multistart; ++s) {
        const NodeParams extra =
            sample_init(derive_seed(opts.seed, static_cast<uint64_t>(s)), layout.p, layout.q);
        try {
            FitResult candidate = ascend(objective, extra, opts);
            if (candidate.loglik > best.loglik) best = std::move(candidate);
        } catch (const InvalidInputError&) {
            // a bad extra start is not an error for the multistart search
        }
    }
    return best;
}

std::vector<FitResult> fit_network(const EventDatabase& db, const NetworkSpec& spec,
                                   const CovariateTracks& tracks,
                                   const std::vector<double>& horizons,
                                   const std::vector<NodeParams>& inits,
                                   const FitOptions& opts, ThetaMode theta_mode,
                                   int workers) {
    const int n = spec.n_nodes();
    if (horizons.size() != static_cast<std::size_t>(n) ||
        inits.size() != static_cast<std::size_t>(n)) {
        throw InvalidInputError("fit_network: need one horizon and one init per node");
    }

    std::vector<FitResult> results(static_cast<std::size_t>(n));
    const auto fit_one = [&](int ui) {
        const std::size_t i = static_cast<std::size_t>(ui);
        try {
            results[i] = fit_node(spec.node_at(ui), db, spec, tracks, horizons[i], inits[i],
                                  opts, theta_mode);
        } catch (const std::exception& err) {
            results[i].ok = false;
            results[i].error = err.what();
            results[i].params = inits[i];
            results[i].loglik = kNegInf;
        }
    };

    if (workers <= 1 || n <= 1) {
        for (int ui = 0; ui < n; ++ui) fit_one(ui);
        return results;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<std::size_t>(n));
    // One task per node; the per-node problems share no mutable state.
    for (int ui = 0; ui < n; ++ui) {
        futures.push_back(std::async(std::launch::async, fit_one, ui));
    }
    for (auto& f : futures) f.get();
    return results;
}

NodeParams sample_init(uint64_t seed, int p, int q) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> alpha_dist(1.0, 2.0);
    std::uniform_real_distribution<double> delta_g_dist(6.0, 18.0);
    std::uniform_real_distribution<double> delta_k_dist(10.0, 30.0);

    NodeParams params;
    params.gamma = unit(rng);
    params.beta.resize(static_cast<std::size_t>(p));
    for (auto& b : params.beta) b = unit(rng);
    params.alpha = alpha_dist(rng);
    params.delta_g = delta_g_dist(rng);
    params.omega.resize(static_cast<std::size_t>(q));
    for (auto& w : params.omega) w = unit(rng);
    params.delta_k = delta_k_dist(rng);
    if (params.gamma == 0.0) params.gamma = std::numeric_limits<double>::min();
    return params;
}

std::vector<InitGridPoint> default_init_grid() {
    std::vector<InitGridPoint> grid;
    for (double alpha : {1.0, 30.0}) {
        for (double delta_k : {5.0, 15.0}) {
            for (double delta_g : {5.0, 12.0}) {
                grid.push_back({alpha, delta_k, delta_g});
            }
        }
    }
    return grid;
}

NodeParams grid_init(NodeId u, const EventDatabase& db, const NetworkSpec& spec,
                     const CovariateTracks& tracks, double horizon,
                     const std::vector<InitGridPoint>& grid, uint64_t seed, int p, int q,
                     ThetaMode theta_mode) {
    if (grid.empty()) throw InvalidInputError("grid_init: candidate grid is empty");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    NodeParams base;
    base.gamma = std::max(unit(rng), std::numeric_limits<double>::min());
    base.beta.resize(static_cast<std::size_t>(p));
    for (auto& b : base.beta) b = unit(rng);
    base.omega.resize(static_cast<std::size_t>(q));
    for (auto& w : base.omega) w = unit(rng);

    const ModelView view{&spec, nullptr, &tracks, theta_mode};
    const Snapshot snap = db.snapshot_through(horizon);

    NodeParams best = base;
    double best_value = kNegInf;
    for (const InitGridPoint& point : grid) {
        NodeParams candidate = base;
        candidate.alpha = point.alpha;
        candidate.delta_k = point.delta_k;
        candidate.delta_g = point.delta_g;
        double value = kNegInf;
        try {
            value = node_loglik(u, candidate, view, snap, horizon);
        } catch (const std::exception&) {
            continue;
        }
        if (value > best_value) {
            best_value = value;
            best = candidate;
        }
    }
    if (best_value == kNegInf) {
        throw InvalidInputError("grid_init: no grid candidate yields a finite objective");
    }
    return best;
}

} // namespace stemmed
