#include "stemmed/model.hpp"

#include <algorithm>
#include <cmath>

namespace stemmed {

namespace {
constexpr double kExpGuard = 700.0;
constexpr double kThetaPseudoCount = 1.0; // add-one smoothing credited to same-drug pairs
} // namespace

double guarded_exp(double x) {
    if (!std::isfinite(x) || x > kExpGuard || x < -kExpGuard) {
        throw OverflowGuardError("exp argument outside [-700, 700]");
    }
    return std::exp(x);
}

namespace {

double dot_checked(std::span<const double> coeffs, std::span<const double> values,
                   const char* what) {
    if (coeffs.size() != values.size()) {
        throw InvalidInputError(std::string(what) + ": dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * values[i];
    return acc;
}

} // namespace

double baseline_rate(const NodeParams& params, const CovariateTrack* track, double t) {
    if (t < 0.0) throw InvalidInputError("baseline_rate: t must be nonnegative");
    double exponent = 0.0;
    if (track != nullptr && !track->empty()) {
        exponent = dot_checked(params.beta, track->value_at(t), "baseline_rate");
    } else if (!params.beta.empty()) {
        throw InvalidInputError("baseline_rate: beta has covariates but no track given");
    }
    return params.gamma * guarded_exp(exponent);
}

double temporal_kernel(double delta_k, double dt) {
    if (dt < 0.0) throw InvalidInputError("temporal_kernel: dt must be nonnegative");
    return std::exp(-delta_k * dt);
}

double mark_gain(std::span<const double> omega, std::span<const double> features) {
    return guarded_exp(dot_checked(omega, features, "mark_gain"));
}

double spatial_gain(double delta_g, double dist) {
    if (dist < 0.0) throw InvalidInputError("spatial_gain: dist must be nonnegative");
    return std::exp(-delta_g * dist);
}

ConnectivityCounter::ConnectivityCounter(int n_communities, int n_drugs)
    : n_drugs_(n_drugs),
      community_counts_(static_cast<std::size_t>(n_communities), 0),
      pair_counts_(static_cast<std::size_t>(n_communities) *
                       (static_cast<std::size_t>(n_drugs) * (n_drugs + 1) / 2),
                   0) {}

std::size_t ConnectivityCounter::pair_index(int community, int drug_a, int drug_b) const {
    const int lo = std::min(drug_a, drug_b);
    const int hi = std::max(drug_a, drug_b);
    // Upper-triangular (lo, hi) with lo <= hi.
    const std::size_t tri = static_cast<std::size_t>(lo) * (2 * n_drugs_ - lo - 1) / 2 +
                            static_cast<std::size_t>(hi);
    return static_cast<std::size_t>(community) *
               (static_cast<std::size_t>(n_drugs_) * (n_drugs_ + 1) / 2) +
           tri;
}

void ConnectivityCounter::add(const Event& e) {
    community_counts_.at(static_cast<std::size_t>(e.node.community)) += 1;
    const auto& drugs = e.drugs_involved;
    for (std::size_t a = 0; a < drugs.size(); ++a) {
        for (std::size_t b = a; b < drugs.size(); ++b) {
            pair_counts_[pair_index(e.node.community, drugs[a], drugs[b])] += 1;
        }
    }
}

double ConnectivityCounter::theta(NodeId u, NodeId v) const {
    const int i = u.community;
    const int j = v.community;
    const bool same_drug = u.drug == v.drug;
    long long both = pair_counts_[pair_index(i, u.drug, v.drug)];
    long long total = community_counts_[static_cast<std::size_t>(i)];
    if (i != j) {
        both += pair_counts_[pair_index(j, u.drug, v.drug)];
        total += community_counts_[static_cast<std::size_t>(j)];
    }
    const double num = static_cast<double>(both) + (same_drug ? kThetaPseudoCount : 0.0);
    const double den = static_cast<double>(total) + kThetaPseudoCount;
    return num / den;
}

ConnectivityCounter ConnectivityCounter::from_snapshot(const NetworkSpec& spec,
                                                       const Snapshot& snap) {
    ConnectivityCounter counter(spec.n_communities(), spec.n_drugs());
    for (const Event& e : snap.global_events()) counter.add(e);
    return counter;
}

double social_connectivity(NodeId u, NodeId v, double t, const NetworkSpec& spec,
                           const Snapshot& snap) {
    if (!spec.contains(u) || !spec.contains(v)) {
        throw InvalidInputError("social_connectivity: node outside network");
    }
    ConnectivityCounter counter(spec.n_communities(), spec.n_drugs());
    for (const Event& e : snap.global_events()) {
        if (!(e.time < t)) break;
        counter.add(e);
    }
    return counter.theta(u, v);
}

double arc_weight(const NodeParams& params_u, NodeId u, NodeId v, double t,
                  const NetworkSpec& spec, const Snapshot& snap) {
    const double g = spatial_gain(params_u.delta_g, spec.distance(u.community, v.community));
    return params_u.alpha * g * social_connectivity(u, v, t, spec, snap);
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

} // namespace

double intensity(NodeId u, double t, const ModelView& view, const Snapshot& snap) {
    const NetworkSpec& spec = *view.spec;
    if (!spec.contains(u)) throw InvalidInputError("intensity: node outside network");
    if (view.params == nullptr ||
        view.params->nodes.size() != static_cast<std::size_t>(spec.n_nodes())) {
        throw InvalidInputError("intensity: parameter block count does not match the grid");
    }
    const int ui = spec.node_index(u);
    const NodeParams& pu = view.node_params(ui);

    const auto counter = view.theta_mode == ThetaMode::Dynamic
                             ? ConnectivityCounter::from_snapshot(spec, snap)
                             : ConnectivityCounter();

    double total = baseline_rate(pu, view.node_track(ui), t);
    if (pu.alpha == 0.0) return total;

    const int n_nodes = spec.n_nodes();
    for (int vi = 0; vi < n_nodes; ++vi) {
        const NodeId v = spec.node_at(vi);
        const double theta = theta_for_mode(view.theta_mode, counter, u, v);
        if (theta == 0.0) continue;
        const double g = spatial_gain(pu.delta_g, spec.distance(u.community, v.community));
        if (g == 0.0) continue;
        double excitation = 0.0;
        for (const Event& e : snap.node_events(vi)) {
            if (!(e.time < t)) break; // snapshot may reach past t
            excitation += mark_gain(pu.omega, e.features) *
                          temporal_kernel(pu.delta_k, t - e.time);
        }
        total += pu.alpha * g * theta * excitation;
    }
    if (!std::isfinite(total) || total <= 0.0) {
        throw NumericDegenerateError("intensity came out nonpositive or non-finite");
    }
    return total;
}

std::vector<double> all_intensities(double t, const ModelView& view, const Snapshot& snap) {
    const int n = view.spec->n_nodes();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int ui = 0; ui < n; ++ui) {
        out[static_cast<std::size_t>(ui)] = intensity(view.spec->node_at(ui), t, view, snap);
    }
    return out;
}

} // namespace stemmed
