#include "stemmed/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stemmed {

void ForecastConfig::validate(double start) const {
    if (!(bin_width > 0.0)) throw InvalidInputError("forecast: bin width must be positive");
    if (!(horizon > start)) throw InvalidInputError("forecast: horizon must exceed the start");
    if (n_sample_paths < 0) throw InvalidInputError("forecast: negative path count");
}

namespace {

// Decayed excitation of the target node from each source node, over events <= t.
std::vector<double> excitation_row(const NodeParams& pu, const ModelView& view,
                                   const Snapshot& snap, double t) {
    const NetworkSpec& spec = *view.spec;
    std::vector<double> row(static_cast<std::size_t>(spec.n_nodes()), 0.0);
    for (const Event& e : snap.global_events()) {
        if (e.time > t) break;
        if (e.features.size() != pu.omega.size()) {
            throw InvalidInputError("forecast: event feature dimension mismatch");
        }
        double exponent = 0.0;
        for (std::size_t j = 0; j < pu.omega.size(); ++j) {
            exponent += pu.omega[j] * e.features[j];
        }
        row[static_cast<std::size_t>(spec.node_index(e.node))] +=
            guarded_exp(exponent) * std::exp(-pu.delta_k * (t - e.time));
    }
    return row;
}

double theta_for_mode(ThetaMode mode, const ConnectivityCounter& counter, NodeId u, NodeId v) {
    switch (mode) {
        case ThetaMode::AlwaysOne: return 1.0;
        case ThetaMode::SelfOnly: return u == v ? 1.0 : 0.0;
        case ThetaMode::Dynamic: break;
    }
    return counter.theta(u, v);
}

double frozen_bin_mass(NodeId u, const NodeParams& pu, const ModelView& view,
                       const std::vector<double>& excitation,
                       const ConnectivityCounter& counter, double frozen_mu, double bin_width) {
    const NetworkSpec& spec = *view.spec;
    double mass = frozen_mu * bin_width;
    if (pu.alpha > 0.0) {
        const double one_minus = -std::expm1(-pu.delta_k * bin_width);
        double sum = 0.0;
        for (int vi = 0; vi < spec.n_nodes(); ++vi) {
            const double x = excitation[static_cast<std::size_t>(vi)];
            if (x == 0.0) continue;
            const NodeId v = spec.node_at(vi);
            const double theta = theta_for_mode(view.theta_mode, counter, u, v);
            if (theta == 0.0) continue;
            sum += spatial_gain(pu.delta_g, spec.distance(u.community, v.community)) * theta * x;
        }
        mass += (pu.alpha / pu.delta_k) * sum * one_minus;
    }
    return mass;
}

// Mark pool with node -> community -> global fallback.
std::vector<const Event*> mark_pool(NodeId u, const EventDatabase& db) {
    std::vector<const Event*> pool;
    for (const Event& e : db.events_at(db.node_index(u))) pool.push_back(&e);
    if (!pool.empty()) return pool;
    for (const Event& e : db.global_events()) {
        if (e.node.community == u.community) pool.push_back(&e);
    }
    if (!pool.empty()) return pool;
    for (const Event& e : db.global_events()) pool.push_back(&e);
    return pool;
}

Mark mark_from_event(const Event& e, int own_drug) {
    Mark m{e.features, e.drugs_involved};
    if (!std::binary_search(m.drugs.begin(), m.drugs.end(), own_drug)) {
        m.drugs.insert(std::lower_bound(m.drugs.begin(), m.drugs.end(), own_drug), own_drug);
    }
    return m;
}

} // namespace

double bin_integral(NodeId u, double t, double bin_width, const ModelView& view,
                    const EventDatabase& working_db) {
    if (!(bin_width > 0.0)) throw InvalidInputError("bin_integral: bin width must be positive");
    const NetworkSpec& spec = *view.spec;
    if (!spec.contains(u)) throw InvalidInputError("bin_integral: node outside network");
    const int ui = spec.node_index(u);
    const NodeParams& pu = view.node_params(ui);

    const Snapshot snap = working_db.snapshot_through(t);
    const auto excitation = excitation_row(pu, view, snap, t);
    const auto counter = view.theta_mode == ThetaMode::Dynamic
                             ? ConnectivityCounter::from_snapshot(spec, snap)
                             : ConnectivityCounter();
    const double mu = baseline_rate(pu, view.node_track(ui), t);
    return frozen_bin_mass(u, pu, view, excitation, counter, mu, bin_width);
}

std::vector<Mark> sample_marks(NodeId u, const EventDatabase& db, int count, uint64_t seed) {
    if (count < 0) throw InvalidInputError("sample_marks: negative count");
    std::vector<Mark> out;
    if (count == 0) return out;
    const auto pool = mark_pool(u, db);
    if (pool.empty()) {
        throw InvalidInputError("sample_marks: no historical marks to resample from");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        out.push_back(mark_from_event(*pool[pick(rng)], u.drug));
    }
    return out;
}

ForecastResult multi_period_predict(const EventDatabase& db, const ModelView& view,
                                    const ForecastConfig& config, double start) {
    config.validate(start);
    const NetworkSpec& spec = *view.spec;
    const int n_nodes = spec.n_nodes();
    if (view.params == nullptr ||
        view.params->nodes.size() != static_cast<std::size_t>(n_nodes)) {
        throw InvalidInputError("forecast: fitted parameters required for every node");
    }

    const int n_bins = static_cast<int>(
        std::ceil((config.horizon - start) / config.bin_width - 1e-12));

    ForecastResult result;
    result.start = start;
    result.bin_width = config.bin_width;
    result.expected_mode_approximation = config.n_sample_paths == 0;
    for (int k = 0; k < n_bins; ++k) {
        result.bin_start.push_back(start + k * config.bin_width);
    }
    result.expected.assign(static_cast<std::size_t>(n_bins),
                           std::vector<double>(static_cast<std::size_t>(n_nodes), 0.0));

    // Frozen baselines: covariates held at their start-time values.
    std::vector<double> frozen_mu(static_cast<std::size_t>(n_nodes));
    for (int ui = 0; ui < n_nodes; ++ui) {
        frozen_mu[static_cast<std::size_t>(ui)] =
            baseline_rate(view.node_params(ui), view.node_track(ui), start);
    }

    const Snapshot history = db.snapshot_through(start);
    const ConnectivityCounter start_counter =
        view.theta_mode == ThetaMode::Dynamic
            ? ConnectivityCounter::from_snapshot(spec, history)
            : ConnectivityCounter();

    if (config.n_sample_paths == 0) {
        // Deterministic propagation: each bin's expected count joins the
        // excitation as mass scaled by the node's mean historical mark gain.
        std::vector<std::vector<double>> excitation(static_cast<std::size_t>(n_nodes));
        for (int ui = 0; ui < n_nodes; ++ui) {
            excitation[static_cast<std::size_t>(ui)] =
                excitation_row(view.node_params(ui), view, history, start);
        }
        // Mean mark gain of target u over source v's start-time pool.
        std::vector<std::vector<double>> mean_gain(
            static_cast<std::size_t>(n_nodes),
            std::vector<double>(static_cast<std::size_t>(n_nodes), 1.0));
        if (db.total_events() > 0) {
            for (int vi = 0; vi < n_nodes; ++vi) {
                const auto pool = mark_pool(spec.node_at(vi), db);
                if (pool.empty()) continue;
                for (int ui = 0; ui < n_nodes; ++ui) {
                    const auto& omega = view.node_params(ui).omega;
                    double sum = 0.0;
                    for (const Event* e : pool) {
                        double exponent = 0.0;
                        for (std::size_t j = 0; j < omega.size(); ++j) {
                            exponent += omega[j] * e->features[j];
                        }
                        sum += guarded_exp(exponent);
                    }
                    mean_gain[static_cast<std::size_t>(ui)][static_cast<std::size_t>(vi)] =
                        sum / static_cast<double>(pool.size());
                }
            }
        }

        for (int k = 0; k < n_bins; ++k) {
            std::vector<double>& row = result.expected[static_cast<std::size_t>(k)];
            for (int ui = 0; ui < n_nodes; ++ui) {
                row[static_cast<std::size_t>(ui)] = frozen_bin_mass(
                    spec.node_at(ui), view.node_params(ui), view,
                    excitation[static_cast<std::size_t>(ui)], start_counter,
                    frozen_mu[static_cast<std::size_t>(ui)], config.bin_width);
            }
            // Decay to the bin end, then add the expected synthetic mass.
            for (int ui = 0; ui < n_nodes; ++ui) {
                const double decay =
                    std::exp(-view.node_params(ui).delta_k * config.bin_width);
                auto& exc = excitation[static_cast<std::size_t>(ui)];
                for (auto& x : exc) x *= decay;
                for (int vi = 0; vi < n_nodes; ++vi) {
                    exc[static_cast<std::size_t>(vi)] +=
                        row[static_cast<std::size_t>(vi)] *
                        mean_gain[static_cast<std::size_t>(ui)][static_cast<std::size_t>(vi)];
                }
            }
        }
        return result;
    }

    // Sampling mode: independent paths, each with its own working database.
    result.sampled.assign(
        static_cast<std::size_t>(config.n_sample_paths),
        std::vector<std::vector<int>>(static_cast<std::size_t>(n_bins),
                                      std::vector<int>(static_cast<std::size_t>(n_nodes), 0)));
    for (int path = 0; path < config.n_sample_paths; ++path) {
        EventDatabase working = db;
        ConnectivityCounter counter = start_counter;
        std::vector<std::vector<double>> excitation(static_cast<std::size_t>(n_nodes));
        for (int ui = 0; ui < n_nodes; ++ui) {
            excitation[static_cast<std::size_t>(ui)] =
                excitation_row(view.node_params(ui), view, history, start);
        }
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<uint64_t>(path)));

        for (int k = 0; k < n_bins; ++k) {
            const double bin_end = start + (k + 1) * config.bin_width;
            std::vector<int> counts(static_cast<std::size_t>(n_nodes), 0);
            for (int ui = 0; ui < n_nodes; ++ui) {
                const double mass = frozen_bin_mass(
                    spec.node_at(ui), view.node_params(ui), view,
                    excitation[static_cast<std::size_t>(ui)], counter,
                    frozen_mu[static_cast<std::size_t>(ui)], config.bin_width);
                counts[static_cast<std::size_t>(ui)] =
                    mass > 0.0 ? std::poisson_distribution<int>(mass)(rng) : 0;
            }

            // Decay the excitation to the bin end, then append the sampled
            // events there so they feed the following bins.
            for (int ui = 0; ui < n_nodes; ++ui) {
                const double decay =
                    std::exp(-view.node_params(ui).delta_k * config.bin_width);
                for (auto& x : excitation[static_cast<std::size_t>(ui)]) x *= decay;
            }
            for (int vi = 0; vi < n_nodes; ++vi) {
                const int count = counts[static_cast<std::size_t>(vi)];
                if (count == 0) continue;
                const NodeId v = spec.node_at(vi);
                const auto marks = sample_marks(
                    v, working, count,
                    derive_seed(rng(), static_cast<uint64_t>(vi)));
                for (const Mark& m : marks) {
                    Event e;
                    e.time = bin_end;
                    e.node = v;
                    e.features = m.features;
                    e.drugs_involved = m.drugs;
                    working.add(e);
                    if (config.update_theta_with_synthetic &&
                        view.theta_mode == ThetaMode::Dynamic) {
                        counter.add(e);
                    }
                    for (int ui = 0; ui < n_nodes; ++ui) {
                        const auto& omega = view.node_params(ui).omega;
                        double exponent = 0.0;
                        for (std::size_t j = 0; j < omega.size(); ++j) {
                            exponent += omega[j] * m.features[j];
                        }
                        excitation[static_cast<std::size_t>(ui)][static_cast<std::size_t>(vi)] +=
                            guarded_exp(exponent);
                    }
                }
            }
            for (int ui = 0; ui < n_nodes; ++ui) {
                result.sampled[static_cast<std::size_t>(path)][static_cast<std::size_t>(k)]
                              [static_cast<std::size_t>(ui)] =
                                  counts[static_cast<std::size_t>(ui)];
            }
        }
    }

    // Monte Carlo means as the expected counts.
    for (int k = 0; k < n_bins; ++k) {
        for (int ui = 0; ui < n_nodes; ++ui) {
            double sum = 0.0;
            for (int path = 0; path < config.n_sample_paths; ++path) {
                sum += result.sampled[static_cast<std::size_t>(path)][static_cast<std::size_t>(k)]
                                     [static_cast<std::size_t>(ui)];
            }
            result.expected[static_cast<std::size_t>(k)][static_cast<std::size_t>(ui)] =
                sum / static_cast<double>(config.n_sample_paths);
        }
    }
    return result;
}

} // namespace stemmed
