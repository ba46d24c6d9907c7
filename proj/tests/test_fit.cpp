#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "stemmed/fit.hpp"
#include "stemmed/simulate.hpp"

#include <cmath>

using namespace stemmed;
using testutil::grid_spec;
using testutil::make_event;
using testutil::plain_params;

TEST_CASE("poisson rate recovery") {
    // Homogeneous data; the MLE is the event count over the horizon.
    const NetworkSpec spec = grid_spec(1, 1);
    CovariateTracks tracks;
    Scenario scenario;
    scenario.spec = spec;
    scenario.params.nodes.push_back(plain_params(1.0, 0.0, 5.0));
    scenario.marks.n_features = 0;
    scenario.horizon = 100.0;
    scenario.seed = 4242;
    const EventDatabase db = thinning_simulate(scenario, 0.0, 100.0);
    const double n = static_cast<double>(db.total_events());
    REQUIRE(n > 50);

    NodeParams init = plain_params(0.3, 0.0, 5.0);
    FitOptions opts;
    opts.relative_tolerance = 1e-12;
    opts.mask.alpha = false;
    opts.mask.delta_g = false;
    opts.mask.delta_k = false;
    const FitResult fit = fit_node({0, 0}, db, spec, tracks, 100.0, init, opts);
    CHECK(fit.converged);
    CHECK(fit.params.gamma == doctest::Approx(n / 100.0).epsilon(1e-4));
    CHECK(std::abs(fit.params.gamma - n / 100.0) <= 3.0 * std::sqrt(n) / 100.0);
}

TEST_CASE("accepted steps never decrease the objective") {
    const auto instance = oracle::random_instance(31, 2, 25.0);
    REQUIRE(instance.db.events_at(0).size() >= 1);
    FitOptions opts;
    opts.record_trace = true;
    opts.max_iterations = 300;
    const NodeParams init = sample_init(9, 1, 1);
    const FitResult fit = fit_node({0, 0}, instance.db, instance.scenario.spec,
                                   instance.scenario.tracks, 25.0, init, opts);
    REQUIRE(fit.trace.size() >= 2);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) {
        CHECK(fit.trace[i].second >= fit.trace[i - 1].second - 1e-12);
    }
    CHECK(fit.loglik >= fit.trace.front().second);
}

TEST_CASE("fit is deterministic per options and seed") {
    const auto instance = oracle::random_instance(32, 2, 25.0);
    FitOptions opts;
    opts.multistart = 3;
    opts.seed = 555;
    const NodeParams init = sample_init(10, 1, 1);
    const FitResult a = fit_node({0, 0}, instance.db, instance.scenario.spec,
                                 instance.scenario.tracks, 25.0, init, opts);
    const FitResult b = fit_node({0, 0}, instance.db, instance.scenario.spec,
                                 instance.scenario.tracks, 25.0, init, opts);
    CHECK(a.loglik == b.loglik);
    CHECK(a.params.gamma == b.params.gamma);
    CHECK(a.params.delta_k == b.params.delta_k);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("starting at the truth stays near the truth") {
    Scenario scenario = build_scenario(1, 101.0, 2024);
    scenario.params.nodes[0] = NodeParams{0.77, {0.8}, 1.45, 8.82, {0.85}, 14.66};
    const EventDatabase db = thinning_simulate(scenario, 0.0, 101.0);
    FitOptions opts;
    const FitResult fit = fit_node({0, 0}, db, scenario.spec, scenario.tracks, 100.0,
                                   scenario.params.nodes[0], opts);
    CHECK(fit.converged);
    // No divergence: stays within a loose factor of the generating values.
    CHECK(fit.params.gamma > 0.77 / 3.0);
    CHECK(fit.params.gamma < 0.77 * 3.0);
    CHECK(fit.params.delta_k > 14.66 / 3.0);
    CHECK(fit.params.delta_k < 14.66 * 3.0);
}

TEST_CASE("non-finite objective at init is rejected") {
    const NetworkSpec spec = grid_spec(1, 1);
    CovariateTracks tracks;
    EventDatabase db(spec);
    db.add(make_event(1.0, {0, 0}));
    NodeParams init = plain_params(1.0, 1.0, 5.0);
    init.omega = {}; // fine
    FitOptions opts;
    NodeParams silly = init;
    silly.gamma = 1e308; // exp overflow in the packed objective
    CHECK_THROWS_AS(
        fit_node({0, 0}, db, spec, tracks, 2.0,
                 [&] {
                     NodeParams p = silly;
                     p.gamma = std::exp(701.0); // not representable: inf
                     return p;
                 }(),
                 opts),
        std::exception);
}

TEST_CASE("fit_network collects results per node") {
    const Scenario scenario = build_scenario(4, 30.0, 77);
    const EventDatabase db = thinning_simulate(scenario, 0.0, 30.0);
    const int n = scenario.spec.n_nodes();
    std::vector<double> horizons(static_cast<std::size_t>(n), 30.0);
    std::vector<NodeParams> inits;
    for (int ui = 0; ui < n; ++ui) inits.push_back(sample_init(900 + ui, 1, 1));
    FitOptions opts;
    opts.max_iterations = 400;

    const auto sequential = fit_network(db, scenario.spec, scenario.tracks, horizons, inits,
                                        opts, ThetaMode::Dynamic, 1);
    const auto parallel = fit_network(db, scenario.spec, scenario.tracks, horizons, inits,
                                      opts, ThetaMode::Dynamic, 4);
    REQUIRE(sequential.size() == static_cast<std::size_t>(n));
    for (int ui = 0; ui < n; ++ui) {
        const std::size_t i = static_cast<std::size_t>(ui);
        CHECK(sequential[i].ok == parallel[i].ok);
        CHECK(sequential[i].loglik == parallel[i].loglik);
        CHECK(sequential[i].params.gamma == parallel[i].params.gamma);
        CHECK(sequential[i].params.delta_k == parallel[i].params.delta_k);
        CHECK(sequential[i].iterations == parallel[i].iterations);
    }
}

TEST_CASE("sample_init") {
    SUBCASE("deterministic per seed") {
        const NodeParams a = sample_init(123, 2, 3);
        const NodeParams b = sample_init(123, 2, 3);
        CHECK(a.gamma == b.gamma);
        CHECK(a.beta == b.beta);
        CHECK(a.alpha == b.alpha);
        CHECK(a.delta_g == b.delta_g);
        CHECK(a.omega == b.omega);
        CHECK(a.delta_k == b.delta_k);
    }
    SUBCASE("bounds and alpha mean") {
        double alpha_sum = 0.0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            const NodeParams p = sample_init(static_cast<uint64_t>(i), 1, 1);
            CHECK(p.gamma >= 0.0);
            CHECK(p.gamma <= 1.0);
            CHECK(p.beta[0] >= 0.0);
            CHECK(p.beta[0] <= 1.0);
            CHECK(p.alpha >= 1.0);
            CHECK(p.alpha <= 2.0);
            CHECK(p.delta_g >= 6.0);
            CHECK(p.delta_g <= 18.0);
            CHECK(p.omega[0] >= 0.0);
            CHECK(p.omega[0] <= 1.0);
            CHECK(p.delta_k >= 10.0);
            CHECK(p.delta_k <= 30.0);
            alpha_sum += p.alpha;
        }
        const double mean = alpha_sum / n;
        const double sigma = (1.0 / std::sqrt(12.0)) / std::sqrt(static_cast<double>(n));
        CHECK(std::abs(mean - 1.5) <= 3.0 * sigma);
    }
}

TEST_CASE("grid_init") {
    const Scenario scenario = [] {
        Scenario s = build_scenario(1, 60.0, 99);
        s.params.nodes[0] = NodeParams{0.9, {0.5}, 1.3, 8.0, {0.7}, 12.0};
        return s;
    }();
    const EventDatabase db = thinning_simulate(scenario, 0.0, 60.0);

    SUBCASE("default grid carries the documented start point") {
        const auto grid = default_init_grid();
        const bool has = std::any_of(grid.begin(), grid.end(), [](const InitGridPoint& g) {
            return g.alpha == 30.0 && g.delta_k == 5.0 && g.delta_g == 5.0;
        });
        CHECK(has);
    }
    SUBCASE("singleton grid returns that point") {
        const std::vector<InitGridPoint> grid{{2.5, 7.0, 3.0}};
        const NodeParams init = grid_init({0, 0}, db, scenario.spec, scenario.tracks, 60.0,
                                          grid, 5, 1, 1);
        CHECK(init.alpha == 2.5);
        CHECK(init.delta_k == 7.0);
        CHECK(init.delta_g == 3.0);
    }
    SUBCASE("truth beats a far-off point") {
        const std::vector<InitGridPoint> grid{{1.3, 12.0, 8.0}, {200.0, 0.2, 0.0}};
        const NodeParams init = grid_init({0, 0}, db, scenario.spec, scenario.tracks, 60.0,
                                          grid, 5, 1, 1);
        CHECK(init.alpha == 1.3);
    }
    SUBCASE("empty grid is invalid") {
        CHECK_THROWS_AS(grid_init({0, 0}, db, scenario.spec, scenario.tracks, 60.0, {}, 5,
                                  1, 1),
                        InvalidInputError);
    }
}
