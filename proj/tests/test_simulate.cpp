#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "stemmed/likelihood.hpp"
#include "stemmed/simulate.hpp"

#include <cmath>

using namespace stemmed;
using testutil::grid_spec;
using testutil::plain_params;

namespace {

Scenario homogeneous_scenario(double gamma, double horizon, uint64_t seed) {
    Scenario scenario;
    scenario.spec = grid_spec(1, 1);
    scenario.params.nodes.push_back(plain_params(gamma, 0.0, 5.0));
    scenario.marks.n_features = 0;
    scenario.horizon = horizon;
    scenario.seed = seed;
    return scenario;
}

} // namespace

TEST_CASE("homogeneous event counts match the Poisson mean") {
    const Scenario scenario = homogeneous_scenario(0.5, 1000.0, 321);
    const EventDatabase db = thinning_simulate(scenario, 0.0, 1000.0);
    const double n = static_cast<double>(db.total_events());
    CHECK(std::abs(n - 500.0) <= 3.0 * std::sqrt(500.0));
}

TEST_CASE("simulation is deterministic per seed") {
    const Scenario scenario = build_scenario(4, 40.0, 65);
    const EventDatabase a = thinning_simulate(scenario, 0.0, 40.0);
    const EventDatabase b = thinning_simulate(scenario, 0.0, 40.0);
    REQUIRE(a.total_events() == b.total_events());
    for (std::size_t i = 0; i < a.global_events().size(); ++i) {
        const Event& ea = a.global_events()[i];
        const Event& eb = b.global_events()[i];
        CHECK(ea.time == eb.time);
        CHECK(ea.node == eb.node);
        CHECK(ea.features == eb.features);
        CHECK(ea.drugs_involved == eb.drugs_involved);
    }

    Scenario other = scenario;
    other.seed = 66;
    const EventDatabase c = thinning_simulate(other, 0.0, 40.0);
    CHECK((c.total_events() != a.total_events() ||
           c.global_events().front().time != a.global_events().front().time));
}

TEST_CASE("uncoupled nodes match independent single-node runs in distribution") {
    // One community, two drugs, zero co-involvement: the cross-pair
    // connectivity numerator stays at zero, so the streams are independent.
    const int reps = 200;
    const double T = 30.0;
    std::vector<double> joint_counts, solo_counts;
    for (int r = 0; r < reps; ++r) {
        Scenario joint;
        joint.spec = grid_spec(1, 2);
        joint.params.nodes.push_back(plain_params(0.8, 1.2, 6.0));
        joint.params.nodes.push_back(plain_params(0.5, 0.9, 8.0));
        joint.marks.n_features = 0;
        joint.marks.co_drug_prob = 0.0;
        joint.horizon = T;
        joint.seed = derive_seed(1000, static_cast<uint64_t>(r));
        const EventDatabase dbj = thinning_simulate(joint, 0.0, T);
        joint_counts.push_back(static_cast<double>(dbj.events_at(0).size()));

        Scenario solo;
        solo.spec = grid_spec(1, 1);
        solo.params.nodes.push_back(plain_params(0.8, 1.2, 6.0));
        solo.marks.n_features = 0;
        solo.horizon = T;
        solo.seed = derive_seed(2000, static_cast<uint64_t>(r));
        const EventDatabase dbs = thinning_simulate(solo, 0.0, T);
        solo_counts.push_back(static_cast<double>(dbs.total_events()));
    }
    CHECK(oracle::ks_two_sample_p(joint_counts, solo_counts) > 0.01);
}

TEST_CASE("count/compensator martingale identity at the generating params") {
    // N(T) - integral of the intensity has mean zero.
    const NodeParams gt{0.77, {0.8}, 1.45, 8.82, {0.85}, 14.66};
    const int reps = 200;
    double diff_sum = 0.0, mass_sum = 0.0;
    for (int r = 0; r < reps; ++r) {
        Scenario scenario = build_scenario(1, 101.0, derive_seed(31337, r));
        scenario.params.nodes[0] = gt;
        const EventDatabase db = thinning_simulate(scenario, 0.0, 101.0);
        const ModelView view = scenario.view();
        const double mass = compensator({0, 0}, 101.0, view, db.snapshot_all());
        diff_sum += static_cast<double>(db.total_events()) - mass;
        mass_sum += mass;
    }
    const double mean_diff = diff_sum / reps;
    const double sigma = std::sqrt(mass_sum / reps / reps);
    CHECK(std::abs(mean_diff) <= 3.0 * sigma);
}

TEST_CASE("existing history feeds the continuation") {
    Scenario scenario = homogeneous_scenario(0.5, 10.0, 9);
    scenario.params.nodes[0].alpha = 2.0;
    scenario.params.nodes[0].delta_k = 1.0;
    EventDatabase seeded(scenario.spec);
    seeded.add(testutil::make_event(4.9, {0, 0}));
    const EventDatabase out = thinning_simulate(scenario, 5.0, 10.0, &seeded);
    CHECK(out.total_events() >= 1);
    CHECK(out.global_events().front().time == 4.9);

    EventDatabase late(scenario.spec);
    late.add(testutil::make_event(7.0, {0, 0}));
    CHECK_THROWS_AS(thinning_simulate(scenario, 5.0, 10.0, &late), InvalidInputError);
}

TEST_CASE("build_scenario shapes") {
    const Scenario one = build_scenario(1, 50.0, 5);
    CHECK(one.spec.n_communities() == 1);
    CHECK(one.spec.n_drugs() == 1);

    const Scenario four = build_scenario(4, 50.0, 5);
    CHECK(four.spec.n_communities() == 2);
    CHECK(four.spec.n_drugs() == 2);

    const Scenario sixty = build_scenario(60, 50.0, 5);
    CHECK(sixty.spec.n_communities() == 10);
    CHECK(sixty.spec.n_drugs() == 6);

    const Scenario again = build_scenario(4, 50.0, 5);
    CHECK(again.spec.distances == four.spec.distances);
    CHECK(again.params.nodes[2].delta_k == four.params.nodes[2].delta_k);

    CHECK_THROWS_AS(build_scenario(0, 50.0, 5), InvalidInputError);

    // Communities land in the unit square.
    for (const auto& row : sixty.spec.distances) {
        for (double d : row) CHECK(d <= std::sqrt(2.0) + 1e-12);
    }
}

TEST_CASE("thinning rejects bad windows") {
    const Scenario scenario = homogeneous_scenario(0.5, 10.0, 9);
    CHECK_THROWS_AS(thinning_simulate(scenario, 5.0, 5.0), InvalidInputError);
    CHECK_THROWS_AS(thinning_simulate(scenario, 6.0, 5.0), InvalidInputError);
}

TEST_CASE("recovery report plumbing") {
    const NodeParams gt{0.77, {0.8}, 1.45, 8.82, {0.85}, 14.66};
    const auto report = recovery_experiment(1, {50.0, 100.0}, 3, gt, 9);
    REQUIRE(report.cells.size() == 2);
    CHECK(report.cells[0].cutoff == 50.0);
    CHECK(report.cells[1].cutoff == 100.0);
    for (const auto& cell : report.cells) {
        CHECK(cell.estimates.size() + static_cast<std::size_t>(cell.n_failed) == 3);
        CHECK(cell.param_names ==
              std::vector<std::string>{"gamma", "beta", "alpha", "delta_g", "omega",
                                       "delta_k"});
    }

    // One replication: the report equals that single fit.
    const auto single = recovery_experiment(1, {100.0}, 1, gt, 11);
    REQUIRE(single.cells[0].estimates.size() == 1);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(single.cells[0].mean[k] == single.cells[0].estimates[0][k]);
        CHECK(single.cells[0].p2_5[k] == single.cells[0].estimates[0][k]);
    }
}

TEST_CASE("empirical quantiles interpolate") {
    std::vector<double> values{4.0, 1.0, 3.0, 2.0};
    CHECK(empirical_quantile(values, 0.0) == 1.0);
    CHECK(empirical_quantile(values, 1.0) == 4.0);
    CHECK(empirical_quantile(values, 0.5) == doctest::Approx(2.5));
    CHECK_THROWS_AS(empirical_quantile({}, 0.5), InvalidInputError);
}
