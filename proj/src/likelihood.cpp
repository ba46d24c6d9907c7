#include "stemmed/likelihood.hpp"

#include <algorithm>
#include <cmath>

namespace stemmed {

namespace {
constexpr double kLogFloor = -20.0; // alpha / delta_g optimize as floored logs
}

std::vector<double> pack_params(const NodeParams& params) {
    const ParamLayout layout{static_cast<int>(params.beta.size()),
                             static_cast<int>(params.omega.size())};
    std::vector<double> packed(static_cast<std::size_t>(layout.size()));
    packed[layout.log_gamma()] = std::log(params.gamma);
    for (int j = 0; j < layout.p; ++j) packed[layout.beta(j)] = params.beta[j];
    packed[layout.log_alpha()] = std::log(std::max(params.alpha, std::exp(kLogFloor)));
    packed[layout.log_delta_g()] = std::log(std::max(params.delta_g, std::exp(kLogFloor)));
    for (int j = 0; j < layout.q; ++j) packed[layout.omega(j)] = params.omega[j];
    packed[layout.log_delta_k()] = std::log(params.delta_k);
    return packed;
}

NodeParams unpack_params(const std::vector<double>& packed, const ParamLayout& layout) {
    if (packed.size() != static_cast<std::size_t>(layout.size())) {
        throw InvalidInputError("unpack_params: packed vector has wrong length");
    }
    NodeParams params;
    params.gamma = std::exp(packed[layout.log_gamma()]);
    params.beta.resize(static_cast<std::size_t>(layout.p));
    for (int j = 0; j < layout.p; ++j) params.beta[j] = packed[layout.beta(j)];
    params.alpha = std::exp(std::max(packed[layout.log_alpha()], kLogFloor));
    params.delta_g = std::exp(std::max(packed[layout.log_delta_g()], kLogFloor));
    params.omega.resize(static_cast<std::size_t>(layout.q));
    for (int j = 0; j < layout.q; ++j) params.omega[j] = packed[layout.omega(j)];
    params.delta_k = std::exp(packed[layout.log_delta_k()]);
    return params;
}

namespace {

double theta_for_mode(ThetaMode mode, const ConnectivityCounter& counter, NodeId u, NodeId v) {
    switch (mode) {
        case ThetaMode::AlwaysOne: return 1.0;
        case ThetaMode::SelfOnly: return u == v ? 1.0 : 0.0;
        case ThetaMode::Dynamic: break;
    }
    return counter.theta(u, v);
}

NodeLoglik sweep(NodeId u, const NodeParams& params_u, const ModelView& view,
                 const Snapshot& snap, double horizon, bool want_gradient) {
    const NetworkSpec& spec = *view.spec;
    if (!spec.contains(u)) throw InvalidInputError("node_loglik: node outside network");
    if (!(horizon > 0.0)) throw InvalidInputError("horizon must be positive");
    params_u.validate();

    const int ui = spec.node_index(u);
    const int n_nodes = spec.n_nodes();
    const ParamLayout layout{static_cast<int>(params_u.beta.size()),
                             static_cast<int>(params_u.omega.size())};
    const std::size_t p = static_cast<std::size_t>(layout.p);
    const std::size_t q = static_cast<std::size_t>(layout.q);

    const CovariateTrack* track = view.node_track(ui);
    const bool has_track = track != nullptr && !track->empty();
    if (has_track && track->dim() != layout.p) {
        throw InvalidInputError("node_loglik: beta dimension does not match covariate track");
    }
    if (!has_track && layout.p != 0) {
        throw InvalidInputError("node_loglik: beta has covariates but no track given");
    }

    const auto events = snap.global_events();

    // Grid: event times up to the horizon, covariate breakpoints, horizon.
    std::vector<double> grid;
    grid.reserve(events.size() + 8);
    for (const Event& e : events) {
        if (e.time > horizon) break;
        grid.push_back(e.time);
    }
    if (has_track) {
        for (double b : track->breakpoints) {
            if (b > 0.0 && b < horizon) grid.push_back(b);
        }
    }
    grid.push_back(horizon);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const double alpha = params_u.alpha;
    const double dk = params_u.delta_k;
    const double dg = params_u.delta_g;
    const bool track_excitation = alpha > 0.0;

    std::vector<double> gain(static_cast<std::size_t>(n_nodes));
    std::vector<double> dist(static_cast<std::size_t>(n_nodes));
    for (int vi = 0; vi < n_nodes; ++vi) {
        const std::size_t v = static_cast<std::size_t>(vi);
        dist[v] = spec.distance(u.community, spec.node_at(vi).community);
        gain[v] = std::exp(-dg * dist[v]);
    }

    // Decayed per-source accumulators: S = sum eta k, R = sum eta dt k,
    // W_j = sum eta m_j k.
    std::vector<double> acc_s(static_cast<std::size_t>(n_nodes), 0.0);
    std::vector<double> acc_r(static_cast<std::size_t>(n_nodes), 0.0);
    std::vector<double> acc_w(static_cast<std::size_t>(n_nodes) * q, 0.0);

    ConnectivityCounter counter(spec.n_communities(), spec.n_drugs());

    NodeLoglik out;
    if (want_gradient) out.gradient.assign(static_cast<std::size_t>(layout.size()), 0.0);
    auto grad = [&](int idx) -> double& { return out.gradient[static_cast<std::size_t>(idx)]; };

    const std::vector<double> no_covariates;
    const auto track_value = [&](double t) -> const std::vector<double>& {
        return has_track ? track->value_at(t) : no_covariates;
    };

    std::size_t cursor = 0;
    double prev = 0.0;
    double sum_s = 0.0, sum_sd = 0.0, sum_r = 0.0;
    std::vector<double> sum_w(q, 0.0);
    std::vector<double> s_mark_h(q, 0.0);

    for (double h : grid) {
        const double dt = h - prev;
        const double decay = std::exp(-dk * dt);

        // Source sums at the segment's left endpoint, weighted by g * theta.
        sum_s = sum_sd = sum_r = 0.0;
        std::fill(sum_w.begin(), sum_w.end(), 0.0);
        if (track_excitation) {
            for (int vi = 0; vi < n_nodes; ++vi) {
                const std::size_t v = static_cast<std::size_t>(vi);
                if (acc_s[v] == 0.0 && acc_r[v] == 0.0) continue;
                const double theta =
                    theta_for_mode(view.theta_mode, counter, u, spec.node_at(vi));
                if (theta == 0.0) continue;
                const double gt = gain[v] * theta;
                sum_s += gt * acc_s[v];
                sum_sd += dist[v] * gt * acc_s[v];
                sum_r += gt * acc_r[v];
                for (std::size_t j = 0; j < q; ++j) sum_w[j] += gt * acc_w[v * q + j];
            }
        }

        if (dt > 0.0) {
            const std::vector<double>& y_left = track_value(prev);
            double exponent = 0.0;
            for (std::size_t j = 0; j < p; ++j) exponent += params_u.beta[j] * y_left[j];
            const double mu_left = params_u.gamma * guarded_exp(exponent);
            const double one_minus = -std::expm1(-dk * dt); // 1 - decay
            out.compensator += mu_left * dt + (alpha / dk) * sum_s * one_minus;
            if (want_gradient) {
                grad(layout.log_gamma()) -= mu_left * dt;
                for (std::size_t j = 0; j < p; ++j) {
                    grad(layout.beta(static_cast<int>(j))) -= mu_left * y_left[j] * dt;
                }
                grad(layout.log_alpha()) -= (alpha / dk) * sum_s * one_minus;
                grad(layout.log_delta_g()) += (alpha / dk) * dg * sum_sd * one_minus;
                for (std::size_t j = 0; j < q; ++j) {
                    grad(layout.omega(static_cast<int>(j))) -=
                        (alpha / dk) * sum_w[j] * one_minus;
                }
                grad(layout.log_delta_k()) -=
                    alpha * (-sum_s * one_minus / dk - sum_r * one_minus + sum_s * dt * decay);
            }
        }

        if (track_excitation) {
            for (int vi = 0; vi < n_nodes; ++vi) {
                const std::size_t v = static_cast<std::size_t>(vi);
                acc_r[v] = (acc_r[v] + dt * acc_s[v]) * decay;
                acc_s[v] *= decay;
                for (std::size_t j = 0; j < q; ++j) acc_w[v * q + j] *= decay;
            }
        }

        // Events at this grid time: log-intensity terms for node u first
        // (intensity sees only strictly earlier events), then ingestion.
        bool computed_lambda = false;
        double lambda = 0.0, mu_h = 0.0, s_h = 0.0, sd_h = 0.0, r_h = 0.0;
        const std::vector<double>* y_h = &no_covariates;
        while (cursor < events.size() && events[cursor].time == h) {
            const Event& e = events[cursor];
            ++cursor;
            if (e.features.size() != q) {
                throw InvalidInputError("node_loglik: event feature dimension mismatch");
            }
            const int vi = spec.node_index(e.node);
            if (vi == ui) {
                if (!computed_lambda) {
                    // Post-decay sums follow from the segment sums by scaling;
                    // theta has not ingested events at h yet.
                    s_h = sum_s * decay;
                    sd_h = sum_sd * decay;
                    r_h = (sum_r + dt * sum_s) * decay;
                    for (std::size_t j = 0; j < q; ++j) s_mark_h[j] = sum_w[j] * decay;
                    y_h = &track_value(h);
                    double exponent = 0.0;
                    for (std::size_t j = 0; j < p; ++j) {
                        exponent += params_u.beta[j] * (*y_h)[j];
                    }
                    mu_h = params_u.gamma * guarded_exp(exponent);
                    lambda = mu_h + alpha * s_h;
                    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
                        throw NumericDegenerateError(
                            "node_loglik: nonpositive intensity at an event time");
                    }
                    computed_lambda = true;
                }
                out.event_log_sum += std::log(lambda);
                if (want_gradient) {
                    grad(layout.log_gamma()) += mu_h / lambda;
                    for (std::size_t j = 0; j < p; ++j) {
                        grad(layout.beta(static_cast<int>(j))) += mu_h * (*y_h)[j] / lambda;
                    }
                    grad(layout.log_alpha()) += alpha * s_h / lambda;
                    grad(layout.log_delta_g()) += -alpha * dg * sd_h / lambda;
                    for (std::size_t j = 0; j < q; ++j) {
                        grad(layout.omega(static_cast<int>(j))) +=
                            alpha * s_mark_h[j] / lambda;
                    }
                    grad(layout.log_delta_k()) += -alpha * dk * r_h / lambda;
                }
            }
            if (track_excitation) {
                double eta_exponent = 0.0;
                for (std::size_t j = 0; j < q; ++j) {
                    eta_exponent += params_u.omega[j] * e.features[j];
                }
                const double eta = guarded_exp(eta_exponent);
                const std::size_t v = static_cast<std::size_t>(vi);
                acc_s[v] += eta;
                for (std::size_t j = 0; j < q; ++j) acc_w[v * q + j] += eta * e.features[j];
                if (view.theta_mode == ThetaMode::Dynamic) counter.add(e);
            }
        }

        prev = h;
    }

    out.value = out.event_log_sum - out.compensator;
    return out;
}

} // namespace

NodeLoglik node_loglik_detail(NodeId u, const NodeParams& params_u, const ModelView& view,
                              const Snapshot& snap, double horizon, bool want_gradient) {
    const int ui = view.spec->node_index(u);
    const auto own = snap.node_events(ui);
    if (!own.empty() && own.back().time > horizon) {
        throw InvalidInputError("node_loglik: horizon precedes an event at the node");
    }
    return sweep(u, params_u, view, snap, horizon, want_gradient);
}

double node_loglik(NodeId u, const NodeParams& params_u, const ModelView& view,
                   const Snapshot& snap, double horizon) {
    return node_loglik_detail(u, params_u, view, snap, horizon, false).value;
}

std::vector<double> node_loglik_grad(NodeId u, const NodeParams& params_u,
                                     const ModelView& view, const Snapshot& snap,
                                     double horizon) {
    return node_loglik_detail(u, params_u, view, snap, horizon, true).gradient;
}

double compensator(NodeId u, double T, const ModelView& view, const Snapshot& snap) {
    if (!(T > 0.0)) throw InvalidInputError("compensator: T must be positive");
    return sweep(u, view.node_params(view.spec->node_index(u)), view, snap, T, false)
        .compensator;
}

double total_loglik(const ModelView& view, const EventDatabase& db,
                    const std::vector<double>& horizons) {
    const int n = view.spec->n_nodes();
    if (horizons.size() != static_cast<std::size_t>(n)) {
        throw InvalidInputError("total_loglik: one horizon per node required");
    }
    double total = 0.0;
    for (int ui = 0; ui < n; ++ui) {
        const double T = horizons[static_cast<std::size_t>(ui)];
        total += node_loglik(view.spec->node_at(ui), view.node_params(ui), view,
                             db.snapshot_through(T), T);
    }
    return total;
}

} // namespace stemmed
