#include "stemmed/coop.hpp"

#include "stemmed/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace stemmed {

std::string variant_name(ModelVariant variant) {
    switch (variant) {
        case ModelVariant::Stemmed: return "STEMMED";
        case ModelVariant::Sepp: return "SEPP";
        case ModelVariant::Mepp: return "MEPP";
        case ModelVariant::Const: return "CONST";
    }
    return "UNKNOWN";
}

ThetaMode variant_theta_mode(ModelVariant variant) {
    switch (variant) {
        case ModelVariant::Stemmed: return ThetaMode::Dynamic;
        case ModelVariant::Sepp: return ThetaMode::SelfOnly;
        case ModelVariant::Mepp: return ThetaMode::AlwaysOne;
        case ModelVariant::Const: return ThetaMode::SelfOnly;
    }
    return ThetaMode::Dynamic;
}

void CoopSchedule::validate() const {
    if (!(upload_period > 0.0) || !(refresh_period >= upload_period)) {
        throw InvalidInputError("schedule: need 0 < upload period <= refresh period");
    }
    if (!(end > start)) throw InvalidInputError("schedule: end must exceed start");
    if (!(bin_width > 0.0)) throw InvalidInputError("schedule: bin width must be positive");
    if (horizons.empty()) throw InvalidInputError("schedule: no forecast horizons");
    for (int l : horizons) {
        if (l < 1) throw InvalidInputError("schedule: horizons must be positive");
    }
    if (forecast_paths < 0) throw InvalidInputError("schedule: negative path count");
}

void ErrorInjection::validate() const {
    if (!(window_end >= window_start)) {
        throw InvalidInputError("injection: window end before start");
    }
    for (const Event& e : additions) {
        if (e.time < window_start || e.time > window_end) {
            throw InvalidInputError("injection: added event outside the window");
        }
    }
}

EventDatabase inject_errors(const EventDatabase& db, const ErrorInjection& injection) {
    injection.validate();
    const auto in_window = [&](double t) {
        return t >= injection.window_start && t <= injection.window_end;
    };
    const auto targeted = [](const std::vector<int>& nodes, int node) {
        return std::find(nodes.begin(), nodes.end(), node) != nodes.end();
    };

    EventDatabase corrupted(db.n_nodes() / std::max(db.n_drugs(), 1), db.n_drugs());
    for (const Event& e : db.global_events()) {
        const int node = db.node_index(e.node);
        if (in_window(e.time) && targeted(injection.remove_nodes, node)) continue;
        Event copy = e;
        if (in_window(e.time) && targeted(injection.modify_nodes, node) &&
            !copy.features.empty()) {
            copy.features[0] += injection.feature_shift;
        }
        corrupted.add(std::move(copy));
    }
    for (const Event& e : injection.additions) corrupted.add(e);
    return corrupted;
}

namespace {

// Mask and forced coordinates realizing each restricted variant.
struct VariantShape {
    ParamMask mask;
    bool zero_beta{false};
    bool zero_omega{false};
    bool zero_alpha{false};
    bool fix_delta_g{false};
};

VariantShape variant_shape(ModelVariant variant) {
    VariantShape shape;
    switch (variant) {
        case ModelVariant::Stemmed: break;
        case ModelVariant::Sepp:
            shape.mask.beta = false;
            shape.mask.omega = false;
            shape.mask.delta_g = false;
            shape.zero_beta = true;
            shape.zero_omega = true;
            shape.fix_delta_g = true;
            break;
        case ModelVariant::Mepp:
            shape.mask.beta = false;
            shape.mask.omega = false;
            shape.zero_beta = true;
            shape.zero_omega = true;
            break;
        case ModelVariant::Const:
            shape.mask.beta = false;
            shape.mask.omega = false;
            shape.mask.alpha = false;
            shape.mask.delta_g = false;
            shape.mask.delta_k = false;
            shape.zero_beta = true;
            shape.zero_omega = true;
            shape.zero_alpha = true;
            shape.fix_delta_g = true;
            break;
    }
    return shape;
}

NodeParams shaped_init(const VariantShape& shape, int p, int q, double event_rate) {
    NodeParams init;
    init.gamma = std::max(event_rate, 1e-4);
    init.beta.assign(static_cast<std::size_t>(p), 0.0);
    init.alpha = shape.zero_alpha ? 0.0 : 1.0;
    init.delta_g = shape.fix_delta_g ? 0.0 : 5.0;
    init.omega.assign(static_cast<std::size_t>(q), 0.0);
    init.delta_k = 5.0;
    return init;
}

int count_in_bin(const EventDatabase& db, int node, double t0, double t1) {
    const auto& events = db.events_at(node);
    const auto lo = std::upper_bound(events.begin(), events.end(), t0,
                                     [](double t, const Event& e) { return t < e.time; });
    const auto hi = std::upper_bound(events.begin(), events.end(), t1,
                                     [](double t, const Event& e) { return t < e.time; });
    return static_cast<int>(std::distance(lo, hi));
}

} // namespace

OnlineRunResult run_online(const EventDatabase& truth, const NetworkSpec& spec,
                           const CovariateTracks& tracks, ModelVariant variant,
                           const CoopSchedule& schedule, const FitOptions& fit_opts,
                           uint64_t seed,
                           const std::optional<ErrorInjection>& corruption) {
    schedule.validate();
    spec.validate();
    const int n_nodes = spec.n_nodes();
    for (int ui = 0; ui < n_nodes; ++ui) {
        if (count_in_bin(truth, ui, -1.0, schedule.start) < 1) {
            throw InvalidInputError(
                "run_online: the initial training span needs at least one event per node");
        }
    }
    if (corruption) corruption->validate();

    const VariantShape shape = variant_shape(variant);
    const ThetaMode theta_mode = variant_theta_mode(variant);
    const int p = tracks.tracks.empty() ? 0 : tracks.tracks.front().dim();
    const int q = truth.total_events() == 0
                      ? 0
                      : static_cast<int>(truth.global_events().front().features.size());

    FitOptions opts = fit_opts;
    opts.mask = shape.mask;

    OnlineRunResult result;
    std::vector<NodeParams> fitted(static_cast<std::size_t>(n_nodes));
    bool have_model = false;
    bool model_fresh = false;

    NetworkParams params_holder;
    const int max_horizon = *std::max_element(schedule.horizons.begin(), schedule.horizons.end());

    uint64_t issue_counter = 0;
    for (double refit_time = schedule.start; refit_time < schedule.end;
         refit_time += schedule.refresh_period) {
        // Refit every node on the clean store up to the checkpoint. Each refit
        // competes the warm start against a fresh data-driven init and keeps
        // the better objective; early-window fits otherwise get stuck in
        // runaway-triggering modes.
        result.refits += 1;
        bool refit_ok = true;
        for (int ui = 0; ui < n_nodes; ++ui) {
            const std::size_t i = static_cast<std::size_t>(ui);
            const double rate =
                count_in_bin(truth, ui, -1.0, refit_time) / std::max(refit_time, 1.0);
            std::vector<NodeParams> starts;
            NodeParams cold = shaped_init(shape, p, q, rate);
            try {
                NodeParams grid = grid_init(spec.node_at(ui), truth, spec, tracks,
                                            refit_time, default_init_grid(),
                                            derive_seed(seed, 0xF17 + result.refits), p, q,
                                            theta_mode);
                if (shape.zero_beta) grid.beta.assign(static_cast<std::size_t>(p), 0.0);
                if (shape.zero_omega) grid.omega.assign(static_cast<std::size_t>(q), 0.0);
                if (shape.zero_alpha) grid.alpha = 0.0;
                if (shape.fix_delta_g) grid.delta_g = 0.0;
                cold = grid;
            } catch (const std::exception&) {
                // fall back to the rate-based init
            }
            starts.push_back(cold);
            if (have_model) starts.push_back(fitted[i]);

            bool fitted_any = false;
            FitResult best;
            for (const NodeParams& init : starts) {
                try {
                    FitResult fit = fit_node(spec.node_at(ui), truth, spec, tracks,
                                             refit_time, init, opts, theta_mode);
                    if (!fit.ok) continue;
                    if (!fitted_any || fit.loglik > best.loglik) best = std::move(fit);
                    fitted_any = true;
                } catch (const std::exception&) {
                }
            }
            if (fitted_any) {
                fitted[i] = best.params;
            } else {
                refit_ok = false; // carry the previous model forward
                result.refit_failures += 1;
            }
        }
        have_model = true;
        model_fresh = refit_ok;

        // Uploads between this checkpoint and the next: ingest data, forecast.
        for (double issue = refit_time + schedule.upload_period;
             issue <= std::min(refit_time + schedule.refresh_period, schedule.end) + 1e-9;
             issue += schedule.upload_period) {
            ++issue_counter;
            const bool corrupted_now = corruption && issue >= corruption->window_start &&
                                       issue < corruption->window_end;
            const EventDatabase* store = &truth;
            EventDatabase corrupted_store;
            if (corrupted_now) {
                corrupted_store = inject_errors(truth, *corruption);
                store = &corrupted_store;
            }

            params_holder.nodes = fitted;
            const ModelView view{&spec, &params_holder, &tracks, theta_mode};
            ForecastConfig config;
            config.bin_width = schedule.bin_width;
            config.horizon = issue + max_horizon * schedule.bin_width;
            config.n_sample_paths = schedule.forecast_paths;
            config.seed = derive_seed(seed, issue_counter);

            ForecastResult forecast;
            try {
                forecast = multi_period_predict(*store, view, config, issue);
            } catch (const std::exception&) {
                continue; // no usable forecast at this upload
            }

            for (int l : schedule.horizons) {
                const double bin_start = issue + (l - 1) * schedule.bin_width;
                const double bin_end = issue + l * schedule.bin_width;
                if (bin_end > schedule.end + 1e-9) continue; // no realized data yet
                for (int ui = 0; ui < n_nodes; ++ui) {
                    EvalRecord record;
                    record.variant = variant;
                    record.node = ui;
                    record.issue_time = issue;
                    record.horizon = l;
                    record.predicted =
                        forecast.expected[static_cast<std::size_t>(l - 1)]
                                         [static_cast<std::size_t>(ui)];
                    record.realized =
                        static_cast<double>(count_in_bin(truth, ui, bin_start, bin_end));
                    record.model_fresh = model_fresh;
                    result.log.push_back(record);
                }
            }
        }
    }
    return result;
}

std::vector<MspeRow> mspe(const std::vector<EvalRecord>& log, const NetworkSpec& spec,
                          bool by_drug) {
    if (log.empty()) throw InvalidInputError("mspe: empty evaluation log");
    std::map<std::tuple<std::string, int, std::string>, std::pair<double, long long>> groups;
    for (const EvalRecord& r : log) {
        const std::string group =
            by_drug ? spec.drugs.at(static_cast<std::size_t>(spec.node_at(r.node).drug))
                    : std::string("all");
        auto& cell = groups[{variant_name(r.variant), r.horizon, group}];
        const double err = r.predicted - r.realized;
        cell.first += err * err;
        cell.second += 1;
    }
    std::vector<MspeRow> rows;
    rows.reserve(groups.size());
    for (const auto& [key, cell] : groups) {
        rows.push_back(MspeRow{std::get<0>(key), std::get<1>(key), std::get<2>(key),
                               cell.first / static_cast<double>(cell.second), cell.second});
    }
    return rows;
}

namespace {

bool same_event(const Event& a, const Event& b) {
    return a.time == b.time && a.node == b.node && a.features == b.features &&
           a.drugs_involved == b.drugs_involved;
}

// Multiset difference of the two global sequences (both time-sorted).
std::vector<const Event*> symmetric_difference(const EventDatabase& db1,
                                               const EventDatabase& db2) {
    std::vector<const Event*> diff;
    const auto& a = db1.global_events();
    const auto& b = db2.global_events();
    std::vector<bool> matched(b.size(), false);
    for (const Event& e : a) {
        bool found = false;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (!matched[j] && same_event(e, b[j])) {
                matched[j] = true;
                found = true;
                break;
            }
        }
        if (!found) diff.push_back(&e);
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (!matched[j]) diff.push_back(&b[j]);
    }
    return diff;
}

} // namespace

std::vector<RobustnessProbe> robustness_decay(NodeId u, const ModelView& view,
                                              const EventDatabase& db1,
                                              const EventDatabase& db2,
                                              const std::vector<double>& probe_times,
                                              const DiscrepancyScope& scope) {
    const auto diff = symmetric_difference(db1, db2);
    for (const Event* e : diff) {
        switch (scope.kind) {
            case DiscrepancyScope::Kind::TimeWindow:
                if (e->time < scope.window_start || e->time > scope.window_end) {
                    throw InvalidInputError(
                        "robustness_decay: databases differ outside the declared window");
                }
                break;
            case DiscrepancyScope::Kind::SingleNode:
                if (view.spec->node_index(e->node) != scope.node) {
                    throw InvalidInputError(
                        "robustness_decay: databases differ outside the declared node");
                }
                break;
        }
    }

    std::vector<RobustnessProbe> curve;
    curve.reserve(probe_times.size());
    for (double tau : probe_times) {
        const double l1 = intensity(u, tau, view, db1.snapshot_before(tau));
        const double l2 = intensity(u, tau, view, db2.snapshot_before(tau));
        curve.push_back(RobustnessProbe{tau, std::abs(l1 - l2)});
    }
    return curve;
}

} // namespace stemmed
