#include "stemmed/types.hpp"

#include <algorithm>
#include <limits>

namespace stemmed {

void NetworkSpec::validate() const {
    if (communities.empty() || drugs.empty()) {
        throw InvalidInputError("network needs at least one community and one drug");
    }
    const std::size_t n = communities.size();
    if (distances.size() != n) {
        throw InvalidInputError("distance matrix row count does not match community count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (distances[i].size() != n) {
            throw InvalidInputError("distance matrix is not square");
        }
        if (distances[i][i] != 0.0) {
            throw InvalidInputError("distance matrix diagonal must be zero");
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double d = distances[i][j];
            if (!std::isfinite(d) || d < 0.0) {
                throw InvalidInputError("distances must be finite and nonnegative");
            }
            if (d != distances[j][i]) {
                throw InvalidInputError("distance matrix must be symmetric");
            }
        }
    }
}

bool Event::involves(int drug_a, int drug_b) const {
    const auto has = [this](int d) {
        return std::binary_search(drugs_involved.begin(), drugs_involved.end(), d);
    };
    if (drug_a == drug_b) return has(drug_a);
    return has(drug_a) && has(drug_b);
}

const std::vector<double>& CovariateTrack::value_at(double t) const {
    if (values.empty()) {
        throw InvalidInputError("covariate track has no values");
    }
    // Last breakpoint at or before t; clamp to the first value before it.
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
    if (it == breakpoints.begin()) return values.front();
    const auto idx = static_cast<std::size_t>(std::distance(breakpoints.begin(), it)) - 1;
    return values[idx];
}

void CovariateTrack::validate() const {
    if (breakpoints.size() != values.size()) {
        throw InvalidInputError("covariate track breakpoints/values length mismatch");
    }
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i] > breakpoints[i - 1])) {
            throw InvalidInputError("covariate breakpoints must be strictly increasing");
        }
    }
    const std::size_t p = values.empty() ? 0 : values.front().size();
    for (const auto& v : values) {
        if (v.size() != p) {
            throw InvalidInputError("covariate vectors must share one dimension");
        }
    }
}

void NodeParams::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InvalidInputError("gamma must be strictly positive and finite");
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw InvalidInputError("alpha must be nonnegative and finite");
    }
    if (!(delta_g >= 0.0) || !std::isfinite(delta_g)) {
        throw InvalidInputError("delta_g must be nonnegative and finite");
    }
    if (!(delta_k > 0.0) || !std::isfinite(delta_k)) {
        throw InvalidInputError("delta_k must be strictly positive and finite");
    }
    for (double b : beta) {
        if (!std::isfinite(b)) throw InvalidInputError("beta must be finite");
    }
    for (double w : omega) {
        if (!std::isfinite(w)) throw InvalidInputError("omega must be finite");
    }
}

namespace {

struct TimeLess {
    bool operator()(const Event& e, double t) const { return e.time < t; }
    bool operator()(double t, const Event& e) const { return t < e.time; }
};

std::span<const Event> prefix_before(const std::vector<Event>& events, double cutoff) {
    auto end = std::lower_bound(events.begin(), events.end(), cutoff, TimeLess{});
    return {events.data(), static_cast<std::size_t>(std::distance(events.begin(), end))};
}

} // namespace

std::span<const Event> Snapshot::node_events(int node_index) const {
    return prefix_before(db_->events_at(node_index), cutoff_);
}

std::span<const Event> Snapshot::global_events() const {
    return prefix_before(db_->global_events(), cutoff_);
}

void EventDatabase::add(Event e) {
    if (!std::isfinite(e.time) || e.time < 0.0) {
        throw InvalidInputError("event time must be finite and nonnegative");
    }
    const int idx = node_index(e.node);
    if (idx < 0 || idx >= n_nodes()) {
        throw InvalidInputError("event node outside the database's node grid");
    }
    std::sort(e.drugs_involved.begin(), e.drugs_involved.end());
    e.drugs_involved.erase(std::unique(e.drugs_involved.begin(), e.drugs_involved.end()),
                           e.drugs_involved.end());
    if (!std::binary_search(e.drugs_involved.begin(), e.drugs_involved.end(), e.node.drug)) {
        throw InvalidInputError("event drug set must contain the node's own drug");
    }

    auto& node_vec = per_node_[static_cast<std::size_t>(idx)];
    auto pos = std::upper_bound(node_vec.begin(), node_vec.end(), e.time, TimeLess{});
    node_vec.insert(pos, e);

    auto gpos = std::upper_bound(global_.begin(), global_.end(), e.time, TimeLess{});
    global_.insert(gpos, std::move(e));
}

double EventDatabase::last_event_time() const {
    return global_.empty() ? 0.0 : global_.back().time;
}

Snapshot EventDatabase::snapshot_before(double t) const { return Snapshot(*this, t); }

Snapshot EventDatabase::snapshot_through(double t) const {
    return Snapshot(*this, std::nextafter(t, std::numeric_limits<double>::infinity()));
}

Snapshot EventDatabase::snapshot_all() const {
    return Snapshot(*this, std::numeric_limits<double>::infinity());
}

// splitmix64 step; decorrelates derived streams from a master seed.
uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace stemmed
