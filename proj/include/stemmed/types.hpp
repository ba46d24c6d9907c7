#pragma once

#include "stemmed/errors.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stemmed {

// One event stream per community-drug pair.
struct NodeId {
    int community{0};
    int drug{0};

    friend bool operator==(const NodeId&, const NodeId&) = default;
};

// Static geometry of the node grid: labels plus community distances.
struct NetworkSpec {
    std::vector<std::string> communities;
    std::vector<std::string> drugs;
    std::vector<std::vector<double>> distances; // square over communities

    int n_communities() const { return static_cast<int>(communities.size()); }
    int n_drugs() const { return static_cast<int>(drugs.size()); }
    int n_nodes() const { return n_communities() * n_drugs(); }

    int node_index(NodeId u) const { return u.community * n_drugs() + u.drug; }
    NodeId node_at(int index) const {
        return NodeId{index / n_drugs(), index % n_drugs()};
    }
    std::string node_label(NodeId u) const {
        return communities.at(static_cast<std::size_t>(u.community)) + "/" +
               drugs.at(static_cast<std::size_t>(u.drug));
    }

    double distance(int community_a, int community_b) const {
        return distances.at(static_cast<std::size_t>(community_a))
            .at(static_cast<std::size_t>(community_b));
    }

    bool contains(NodeId u) const {
        return u.community >= 0 && u.community < n_communities() && u.drug >= 0 &&
               u.drug < n_drugs();
    }

    // Throws InvalidInputError on empty label lists or a non-symmetric,
    // negative, or nonzero-diagonal distance matrix.
    void validate() const;
};

// One marked event: time, node, feature vector, involved-drug set.
struct Event {
    double time{0.0};
    NodeId node;
    std::vector<double> features;
    std::vector<int> drugs_involved; // sorted, unique, contains node.drug

    bool involves(int drug_a, int drug_b) const;
};

// Left-continuous step function of nodal covariates. The value at t is the
// vector at the last breakpoint at or before t; before the first breakpoint
// the first vector applies.
struct CovariateTrack {
    std::vector<double> breakpoints;
    std::vector<std::vector<double>> values;

    int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
    bool empty() const { return breakpoints.empty(); }
    const std::vector<double>& value_at(double t) const;
    void validate() const;
};

// Per-node parameter block.
struct NodeParams {
    double gamma{1.0};         // baseline magnitude, > 0
    std::vector<double> beta;  // covariate coefficients, length p
    double alpha{0.0};         // arc magnitude, >= 0
    double delta_g{0.0};       // spatial decay, >= 0
    std::vector<double> omega; // mark coefficients, length q
    double delta_k{1.0};       // temporal decay, > 0

    void validate() const;
};

struct NetworkParams {
    std::vector<NodeParams> nodes; // indexed by NetworkSpec::node_index
};

struct CovariateTracks {
    std::vector<CovariateTrack> tracks; // indexed by node; empty => no covariates

    const CovariateTrack* track_for(int node_index) const {
        if (tracks.empty()) return nullptr;
        return &tracks.at(static_cast<std::size_t>(node_index));
    }
};

class EventDatabase;

// Immutable view of the history strictly before `cutoff`.
class Snapshot {
public:
    Snapshot(const EventDatabase& db, double cutoff) : db_(&db), cutoff_(cutoff) {}

    double cutoff() const { return cutoff_; }
    std::span<const Event> node_events(int node_index) const;
    // All events with time < cutoff, in global time order.
    std::span<const Event> global_events() const;
    std::size_t size() const { return global_events().size(); }

private:
    const EventDatabase* db_;
    double cutoff_;
};

// Append-mostly, per-node time-sorted event store. Single writer; snapshots
// are cheap views and must not outlive mutation.
class EventDatabase {
public:
    EventDatabase() = default;
    EventDatabase(int n_communities, int n_drugs)
        : n_drugs_(n_drugs),
          per_node_(static_cast<std::size_t>(n_communities) * static_cast<std::size_t>(n_drugs)) {}
    explicit EventDatabase(const NetworkSpec& spec)
        : EventDatabase(spec.n_communities(), spec.n_drugs()) {}

    int n_nodes() const { return static_cast<int>(per_node_.size()); }
    int n_drugs() const { return n_drugs_; }
    int node_index(NodeId u) const { return u.community * n_drugs_ + u.drug; }

    // Sorted insert (stable for equal timestamps).
    void add(Event e);

    const std::vector<Event>& events_at(int node_index) const {
        return per_node_.at(static_cast<std::size_t>(node_index));
    }
    const std::vector<Event>& global_events() const { return global_; }

    std::size_t total_events() const { return global_.size(); }
    double last_event_time() const;

    // Events with time < t.
    Snapshot snapshot_before(double t) const;
    // Events with time <= t.
    Snapshot snapshot_through(double t) const;
    Snapshot snapshot_all() const;

private:
    int n_drugs_{0};
    std::vector<std::vector<Event>> per_node_;
    std::vector<Event> global_;
};

uint64_t derive_seed(uint64_t master, uint64_t stream);

} // namespace stemmed
