#include "stemmed/simulate.hpp"

#include "stemmed/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace stemmed {

namespace {
constexpr std::size_t kMaxSimulatedEvents = 1'000'000;
}

void Scenario::validate() const {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.n_nodes());
    if (params.nodes.size() != n) {
        throw InvalidInputError("scenario: one parameter block per node required");
    }
    for (const auto& node : params.nodes) node.validate();
    if (!tracks.tracks.empty() && tracks.tracks.size() != n) {
        throw InvalidInputError("scenario: covariate tracks must cover every node");
    }
    for (const auto& track : tracks.tracks) track.validate();
    if (marks.n_features < 0 || marks.co_drug_prob < 0.0 || marks.co_drug_prob > 1.0) {
        throw InvalidInputError("scenario: bad mark model");
    }
    if (!(horizon > 0.0)) throw InvalidInputError("scenario: horizon must be positive");
}

Scenario build_scenario(int n_nodes, double horizon, uint64_t seed, int p, int q) {
    if (n_nodes < 1) throw InvalidInputError("build_scenario: need at least one node");
    if (!(horizon > 0.0)) throw InvalidInputError("build_scenario: horizon must be positive");

    // Near-square factorization; communities take the larger factor.
    int drugs = 1;
    for (int d = static_cast<int>(std::sqrt(static_cast<double>(n_nodes))); d >= 1; --d) {
        if (n_nodes % d == 0) {
            drugs = d;
            break;
        }
    }
    const int communities = n_nodes / drugs;

    Scenario scenario;
    scenario.seed = seed;
    scenario.horizon = horizon;
    scenario.marks.n_features = q;

    std::mt19937_64 rng(derive_seed(seed, 0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    scenario.spec.communities.resize(static_cast<std::size_t>(communities));
    std::vector<std::pair<double, double>> points(static_cast<std::size_t>(communities));
    for (int i = 0; i < communities; ++i) {
        scenario.spec.communities[static_cast<std::size_t>(i)] = "C" + std::to_string(i);
        points[static_cast<std::size_t>(i)] = {unit(rng), unit(rng)};
    }
    scenario.spec.drugs.resize(static_cast<std::size_t>(drugs));
    for (int s = 0; s < drugs; ++s) {
        scenario.spec.drugs[static_cast<std::size_t>(s)] = "D" + std::to_string(s);
    }
    scenario.spec.distances.assign(static_cast<std::size_t>(communities),
                                   std::vector<double>(static_cast<std::size_t>(communities), 0.0));
    for (int i = 0; i < communities; ++i) {
        for (int j = i + 1; j < communities; ++j) {
            const double dx = points[static_cast<std::size_t>(i)].first -
                              points[static_cast<std::size_t>(j)].first;
            const double dy = points[static_cast<std::size_t>(i)].second -
                              points[static_cast<std::size_t>(j)].second;
            const double d = std::sqrt(dx * dx + dy * dy);
            scenario.spec.distances[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = d;
            scenario.spec.distances[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = d;
        }
    }

    // Covariates: per-node reflected random walks on [0.5, 1.5] stepping at
    // unit times, mimicking slowly refreshed nodal information.
    const int n_total = scenario.spec.n_nodes();
    if (p > 0) {
        std::uniform_real_distribution<double> start_level(0.5, 1.5);
        std::uniform_real_distribution<double> step(-0.2, 0.2);
        scenario.tracks.tracks.resize(static_cast<std::size_t>(n_total));
        for (int ui = 0; ui < n_total; ++ui) {
            CovariateTrack track;
            std::vector<double> value(static_cast<std::size_t>(p));
            for (auto& v : value) v = start_level(rng);
            for (double t = 0.0; t <= horizon; t += 1.0) {
                track.breakpoints.push_back(t);
                track.values.push_back(value);
                for (auto& v : value) {
                    v += step(rng);
                    if (v < 0.5) v = 1.0 - v;
                    if (v > 1.5) v = 3.0 - v;
                }
            }
            scenario.tracks.tracks[static_cast<std::size_t>(ui)] = std::move(track);
        }
    }

    scenario.params.nodes.resize(static_cast<std::size_t>(n_total));
    for (int ui = 0; ui < n_total; ++ui) {
        scenario.params.nodes[static_cast<std::size_t>(ui)] =
            sample_init(derive_seed(seed, 1000 + static_cast<uint64_t>(ui)), p, q);
    }

    scenario.validate();
    return scenario;
}

namespace {

// Per-target-node decayed excitation per source node:
// X[u][v] = sum over events at v of eta_u(e) * exp(-delta_uk * (t - t_e)).
class ExcitationMatrix {
public:
    ExcitationMatrix(const NetworkSpec& spec, const NetworkParams& params)
        : n_(spec.n_nodes()), params_(&params), x_(static_cast<std::size_t>(n_) * n_, 0.0) {}

    void decay(double dt) {
        if (dt <= 0.0) return;
        for (int u = 0; u < n_; ++u) {
            const double f =
                std::exp(-params_->nodes[static_cast<std::size_t>(u)].delta_k * dt);
            double* row = &x_[static_cast<std::size_t>(u) * n_];
            for (int v = 0; v < n_; ++v) row[v] *= f;
        }
    }

    void ingest(const Event& e, int source_index) {
        for (int u = 0; u < n_; ++u) {
            const auto& pu = params_->nodes[static_cast<std::size_t>(u)];
            double exponent = 0.0;
            if (e.features.size() != pu.omega.size()) {
                throw InvalidInputError("simulate: event feature dimension mismatch");
            }
            for (std::size_t j = 0; j < pu.omega.size(); ++j) {
                exponent += pu.omega[j] * e.features[j];
            }
            x_[static_cast<std::size_t>(u) * n_ + static_cast<std::size_t>(source_index)] +=
                guarded_exp(exponent);
        }
    }

    // Events with time <= t contribute, decayed to t.
    void ingest_history(const NetworkSpec& spec, const Snapshot& snap, double t) {
        for (const Event& e : snap.global_events()) {
            if (e.time > t) break;
            decay_ingest(spec, e, t);
        }
    }

    double value(int u, int v) const {
        return x_[static_cast<std::size_t>(u) * n_ + static_cast<std::size_t>(v)];
    }

private:
    void decay_ingest(const NetworkSpec& spec, const Event& e, double t) {
        const int vi = spec.node_index(e.node);
        for (int u = 0; u < n_; ++u) {
            const auto& pu = params_->nodes[static_cast<std::size_t>(u)];
            double exponent = 0.0;
            for (std::size_t j = 0; j < pu.omega.size(); ++j) {
                exponent += pu.omega[j] * e.features[j];
            }
            x_[static_cast<std::size_t>(u) * n_ + static_cast<std::size_t>(vi)] +=
                guarded_exp(exponent) * std::exp(-pu.delta_k * (t - e.time));
        }
    }

    int n_;
    const NetworkParams* params_;
    std::vector<double> x_;
};

} // namespace

EventDatabase thinning_simulate(const Scenario& scenario, double t_start, double t_end,
                                const EventDatabase* existing) {
    scenario.validate();
    if (!(t_start < t_end)) {
        throw InvalidInputError("thinning_simulate: need t_start < t_end");
    }
    const NetworkSpec& spec = scenario.spec;
    const int n = spec.n_nodes();

    EventDatabase db = existing != nullptr ? *existing : EventDatabase(spec);
    if (existing != nullptr && db.n_nodes() != n) {
        throw InvalidInputError("thinning_simulate: existing database has a different grid");
    }
    if (existing != nullptr && db.last_event_time() > t_start) {
        throw InvalidInputError("thinning_simulate: existing events after t_start");
    }

    ExcitationMatrix excitation(spec, scenario.params);
    excitation.ingest_history(spec, db.snapshot_all(), t_start);
    ConnectivityCounter counter =
        ConnectivityCounter::from_snapshot(spec, db.snapshot_through(t_start));

    // Baseline jump points: every covariate breakpoint inside (t_start, t_end).
    std::vector<double> jumps;
    for (const auto& track : scenario.tracks.tracks) {
        for (double b : track.breakpoints) {
            if (b > t_start && b < t_end) jumps.push_back(b);
        }
    }
    std::sort(jumps.begin(), jumps.end());
    jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());
    std::size_t next_jump = 0;

    std::mt19937_64 rng(scenario.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> lambda(static_cast<std::size_t>(n));
    const auto intensities_at = [&](double t) {
        double total = 0.0;
        for (int u = 0; u < n; ++u) {
            const auto& pu = scenario.params.nodes[static_cast<std::size_t>(u)];
            double value = baseline_rate(pu, scenario.tracks.track_for(u), t);
            if (pu.alpha > 0.0) {
                const NodeId uid = spec.node_at(u);
                for (int v = 0; v < n; ++v) {
                    const double x = excitation.value(u, v);
                    if (x == 0.0) continue;
                    const double theta = counter.theta(uid, spec.node_at(v));
                    if (theta == 0.0) continue;
                    value += pu.alpha *
                             spatial_gain(pu.delta_g,
                                          spec.distance(uid.community, spec.node_at(v).community)) *
                             theta * x;
                }
            }
            lambda[static_cast<std::size_t>(u)] = value;
            total += value;
        }
        return total;
    };

    double t = t_start;
    while (t < t_end) {
        const double bound = intensities_at(t); // dominates until the next jump
        double segment_end = t_end;
        if (next_jump < jumps.size()) segment_end = std::min(segment_end, jumps[next_jump]);

        if (!(bound > 0.0)) {
            // Nothing can fire until the baseline changes.
            excitation.decay(segment_end - t);
            t = segment_end;
            if (next_jump < jumps.size() && t == jumps[next_jump]) ++next_jump;
            continue;
        }

        std::exponential_distribution<double> waiting(bound);
        const double wait = waiting(rng);
        if (t + wait >= segment_end) {
            excitation.decay(segment_end - t);
            t = segment_end;
            if (next_jump < jumps.size() && t == jumps[next_jump]) ++next_jump;
            continue;
        }

        const double t_cand = t + wait;
        excitation.decay(wait);
        const double candidate_total = intensities_at(t_cand);
        if (unit(rng) * bound <= candidate_total) {
            // Accept; attribute the event to a node by intensity share.
            const double pick = unit(rng) * candidate_total;
            int chosen = n - 1;
            double cumulative = 0.0;
            for (int u = 0; u < n; ++u) {
                cumulative += lambda[static_cast<std::size_t>(u)];
                if (pick <= cumulative) {
                    chosen = u;
                    break;
                }
            }

            Event e;
            e.time = t_cand;
            e.node = spec.node_at(chosen);
            e.features.resize(static_cast<std::size_t>(scenario.marks.n_features));
            for (auto& f : e.features) f = unit(rng);
            e.drugs_involved.push_back(e.node.drug);
            for (int d = 0; d < spec.n_drugs(); ++d) {
                if (d == e.node.drug) continue;
                if (unit(rng) < scenario.marks.co_drug_prob) e.drugs_involved.push_back(d);
            }
            db.add(e);
            counter.add(e);
            excitation.ingest(e, chosen);
            if (db.total_events() > kMaxSimulatedEvents) {
                throw NumericDegenerateError(
                    "thinning_simulate: event budget exceeded (supercritical parameters?)");
            }
        }
        t = t_cand;
    }
    return db;
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInputError("empirical_quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

namespace {

// Fit inits for the recovery runs. The decay inits draw from narrower ranges
// than the scenario parameters: delta_g carries no likelihood signal in
// one-community grids (its estimate distribution is pinned by the init draw)
// and delta_k estimates anchor near their starts on these sample sizes.
NodeParams recovery_fit_init(uint64_t seed, int p, int q) {
    NodeParams init = sample_init(seed, p, q);
    std::mt19937_64 rng(derive_seed(seed, 7));
    init.delta_g = std::uniform_real_distribution<double>(6.0, 12.0)(rng);
    init.delta_k = std::uniform_real_distribution<double>(10.0, 20.0)(rng);
    return init;
}

std::vector<std::string> scalar_param_names(int p, int q) {
    std::vector<std::string> names;
    names.push_back("gamma");
    for (int j = 0; j < p; ++j) {
        names.push_back(p == 1 ? "beta" : "beta" + std::to_string(j));
    }
    names.push_back("alpha");
    names.push_back("delta_g");
    for (int j = 0; j < q; ++j) {
        names.push_back(q == 1 ? "omega" : "omega" + std::to_string(j));
    }
    names.push_back("delta_k");
    return names;
}

std::vector<double> scalarize(const NodeParams& params) {
    std::vector<double> out;
    out.push_back(params.gamma);
    out.insert(out.end(), params.beta.begin(), params.beta.end());
    out.push_back(params.alpha);
    out.push_back(params.delta_g);
    out.insert(out.end(), params.omega.begin(), params.omega.end());
    out.push_back(params.delta_k);
    return out;
}

} // namespace

FitOptions recovery_fit_options() {
    FitOptions opts;
    opts.max_iterations = 100;
    opts.max_step_norm = 0.5;
    return opts;
}

RecoveryReport recovery_experiment(int n_nodes, const std::vector<double>& cutoffs,
                                   int replications, const NodeParams& gt, uint64_t seed,
                                   const FitOptions& opts) {
    if (replications < 1) {
        throw InvalidInputError("recovery_experiment: need at least one replication");
    }
    if (cutoffs.empty()) throw InvalidInputError("recovery_experiment: no cutoffs");
    gt.validate();
    const int p = static_cast<int>(gt.beta.size());
    const int q = static_cast<int>(gt.omega.size());
    const double horizon = 101.0;
    for (double c : cutoffs) {
        if (!(c > 0.0) || c > horizon) {
            throw InvalidInputError("recovery_experiment: cutoffs must lie in (0, 101]");
        }
    }

    RecoveryReport report;
    report.ground_truth = gt;
    report.cells.resize(cutoffs.size());
    for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) {
        report.cells[ci].n_nodes = n_nodes;
        report.cells[ci].cutoff = cutoffs[ci];
        report.cells[ci].param_names = scalar_param_names(p, q);
    }

    const NodeId target{0, 0};
    for (int rep = 0; rep < replications; ++rep) {
        Scenario scenario =
            build_scenario(n_nodes, horizon, derive_seed(seed, static_cast<uint64_t>(rep)), p, q);
        scenario.params.nodes[0] = gt;
        const EventDatabase db = thinning_simulate(scenario, 0.0, horizon);

        for (std::size_t ci = 0; ci < cutoffs.size(); ++ci) {
            const uint64_t init_seed =
                derive_seed(seed, 0x100000 + static_cast<uint64_t>(rep) * 64 + ci);
            const NodeParams init = recovery_fit_init(init_seed, p, q);
            try {
                const FitResult fit = fit_node(target, db, scenario.spec, scenario.tracks,
                                               cutoffs[ci], init, opts);
                if (!fit.ok) throw NumericDegenerateError(fit.error);
                report.cells[ci].estimates.push_back(scalarize(fit.params));
            } catch (const std::exception&) {
                report.cells[ci].n_failed += 1;
            }
        }
    }

    for (auto& cell : report.cells) {
        const std::size_t n_params = cell.param_names.size();
        cell.mean.assign(n_params, 0.0);
        cell.p2_5.assign(n_params, 0.0);
        cell.p97_5.assign(n_params, 0.0);
        if (cell.estimates.empty()) continue;
        for (std::size_t k = 0; k < n_params; ++k) {
            std::vector<double> column;
            column.reserve(cell.estimates.size());
            for (const auto& est : cell.estimates) column.push_back(est[k]);
            double sum = 0.0;
            for (double v : column) sum += v;
            cell.mean[k] = sum / static_cast<double>(column.size());
            cell.p2_5[k] = empirical_quantile(column, 0.025);
            cell.p97_5[k] = empirical_quantile(column, 0.975);
        }
    }
    return report;
}

} // namespace stemmed
