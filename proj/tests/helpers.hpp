#pragma once

#include "stemmed/model.hpp"
#include "stemmed/types.hpp"

#include <string>
#include <vector>

namespace testutil {

inline stemmed::NetworkSpec grid_spec(int n_communities, int n_drugs,
                                      double spacing = 0.25) {
    stemmed::NetworkSpec spec;
    for (int i = 0; i < n_communities; ++i) spec.communities.push_back("C" + std::to_string(i));
    for (int s = 0; s < n_drugs; ++s) spec.drugs.push_back("D" + std::to_string(s));
    spec.distances.assign(static_cast<std::size_t>(n_communities),
                          std::vector<double>(static_cast<std::size_t>(n_communities), 0.0));
    for (int i = 0; i < n_communities; ++i) {
        for (int j = 0; j < n_communities; ++j) {
            spec.distances[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                spacing * std::abs(i - j);
        }
    }
    return spec;
}

inline stemmed::Event make_event(double time, stemmed::NodeId node,
                                 std::vector<double> features = {},
                                 std::vector<int> extra_drugs = {}) {
    stemmed::Event e;
    e.time = time;
    e.node = node;
    e.features = std::move(features);
    e.drugs_involved = std::move(extra_drugs);
    e.drugs_involved.push_back(node.drug);
    return e;
}

inline stemmed::CovariateTrack constant_track(std::vector<double> value) {
    stemmed::CovariateTrack track;
    track.breakpoints = {0.0};
    track.values = {std::move(value)};
    return track;
}

inline stemmed::NodeParams plain_params(double gamma, double alpha, double delta_k,
                                        double delta_g = 0.0) {
    stemmed::NodeParams p;
    p.gamma = gamma;
    p.alpha = alpha;
    p.delta_k = delta_k;
    p.delta_g = delta_g;
    return p;
}

} // namespace testutil
