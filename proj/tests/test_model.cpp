#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "stemmed/model.hpp"
#include "stemmed/simulate.hpp"

#include <cmath>
#include <random>

using namespace stemmed;
using testutil::constant_track;
using testutil::grid_spec;
using testutil::make_event;
using testutil::plain_params;

TEST_CASE("baseline rate") {
    NodeParams p;
    p.gamma = 0.372;
    CHECK(baseline_rate(p, nullptr, 3.0) == doctest::Approx(0.372).epsilon(1e-15));

    NodeParams two;
    two.gamma = 1.0;
    two.beta = {1.0, 0.0};
    const CovariateTrack track = constant_track({std::log(2.0), 5.0});
    CHECK(baseline_rate(two, &track, 0.5) == doctest::Approx(2.0).epsilon(1e-14));

    NodeParams table;
    table.gamma = 0.77;
    table.beta = {0.8};
    const CovariateTrack y = constant_track({0.5});
    CHECK(baseline_rate(table, &y, 1.0) ==
          doctest::Approx(1.1487050171837781).epsilon(1e-13));

    SUBCASE("dimension mismatch") {
        NodeParams bad;
        bad.gamma = 1.0;
        bad.beta = {1.0};
        const CovariateTrack wide = constant_track({1.0, 2.0});
        CHECK_THROWS_AS(baseline_rate(bad, &wide, 0.0), InvalidInputError);
    }
    SUBCASE("overflow guard") {
        NodeParams hot;
        hot.gamma = 1.0;
        hot.beta = {1000.0};
        const CovariateTrack big = constant_track({1.0});
        CHECK_THROWS_AS(baseline_rate(hot, &big, 0.0), OverflowGuardError);
    }
    SUBCASE("negative time") {
        NodeParams p2;
        CHECK_THROWS_AS(baseline_rate(p2, nullptr, -1.0), InvalidInputError);
    }
}

TEST_CASE("temporal kernel") {
    CHECK(temporal_kernel(14.66, 0.0) == 1.0);
    CHECK(temporal_kernel(1.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(temporal_kernel(8.002, 0.25) ==
          doctest::Approx(0.13526763250908566).epsilon(1e-13));
    CHECK_THROWS_AS(temporal_kernel(1.0, -0.1), InvalidInputError);

    // Strictly decreasing in dt.
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 5.0);
    for (int i = 0; i < 200; ++i) {
        const double delta = 0.01 + unif(rng);
        double a = unif(rng), b = unif(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        CHECK(temporal_kernel(delta, a) > temporal_kernel(delta, b));
    }
}

TEST_CASE("mark gain") {
    const std::vector<double> omega{0.3, -2.0};
    const std::vector<double> zero{0.0, 0.0};
    CHECK(mark_gain(omega, zero) == 1.0);
    const std::vector<double> w1{0.85};
    const std::vector<double> m1{1.0};
    CHECK(mark_gain(w1, m1) == doctest::Approx(2.3396468519259909).epsilon(1e-13));
    const std::vector<double> w2{0.568, 0.615};
    const std::vector<double> m2{1.0, 1.0};
    CHECK(mark_gain(w2, m2) == doctest::Approx(3.2641519848379269).epsilon(1e-13));
    CHECK_THROWS_AS(mark_gain(w1, m2), InvalidInputError);
    const std::vector<double> huge{800.0};
    CHECK_THROWS_AS(mark_gain(huge, m1), OverflowGuardError);
}

TEST_CASE("spatial gain") {
    CHECK(spatial_gain(11.3, 0.0) == 1.0);
    CHECK(spatial_gain(8.82, 0.1) == doctest::Approx(0.41395417487127410).epsilon(1e-13));
    CHECK(spatial_gain(0.0, 7.0) == 1.0);
    CHECK_THROWS_AS(spatial_gain(1.0, -1.0), InvalidInputError);
}

TEST_CASE("social connectivity") {
    const NetworkSpec spec = grid_spec(2, 2);
    EventDatabase db(spec);
    const NodeId u{0, 0};
    const NodeId same_comm_other_drug{0, 1};

    SUBCASE("empty history") {
        CHECK(social_connectivity(u, u, 1.0, spec, db.snapshot_before(1.0)) == 1.0);
        CHECK(social_connectivity(u, same_comm_other_drug, 1.0, spec,
                                  db.snapshot_before(1.0)) == 0.0);
    }

    SUBCASE("three co-involved events") {
        // All three involve both drugs; different drugs s != s' => 3/4.
        for (double t : {0.1, 0.2, 0.3}) {
            db.add(make_event(t, u, {}, {1}));
        }
        CHECK(social_connectivity(u, same_comm_other_drug, 1.0, spec,
                                  db.snapshot_before(1.0)) == doctest::Approx(0.75));
    }

    SUBCASE("bounds on random histories") {
        std::mt19937_64 rng(11);
        const NetworkSpec wide = grid_spec(3, 3);
        EventDatabase rdb(wide);
        for (int i = 0; i < 60; ++i) {
            NodeId node{static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)};
            std::vector<int> extra;
            if (rng() % 2 == 0) extra.push_back(static_cast<int>(rng() % 3));
            rdb.add(make_event(0.05 * (i + 1), node, {}, extra));
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    for (int c = 0; c < 3; ++c) {
                        for (int d = 0; d < 3; ++d) {
                            const double theta = social_connectivity(
                                {a, b}, {c, d}, 10.0, wide, rdb.snapshot_before(10.0));
                            CHECK(theta >= 0.0);
                            CHECK(theta <= 1.0);
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("arc weight") {
    const NetworkSpec spec = grid_spec(2, 2, std::log(2.0));
    EventDatabase db(spec);

    SUBCASE("alpha zero kills the arc") {
        const NodeParams p = plain_params(1.0, 0.0, 5.0, 3.0);
        CHECK(arc_weight(p, {0, 0}, {1, 0}, 2.0, spec, db.snapshot_before(2.0)) == 0.0);
    }
    SUBCASE("unit gains") {
        const NodeParams p = plain_params(1.0, 1.45, 5.0, 4.0);
        // Same node: dist 0, same drug, empty history => theta 1.
        CHECK(arc_weight(p, {0, 0}, {0, 0}, 2.0, spec, db.snapshot_before(2.0)) ==
              doctest::Approx(1.45));
    }
    SUBCASE("hand-computed product") {
        // dist = ln 2, delta_g = 1 => gain 0.5; one event involving both
        // drugs gives the cross-drug pair theta = 1 / (1 + 1).
        const NodeParams p = plain_params(1.0, 2.0, 5.0, 1.0);
        db.add(make_event(0.5, {0, 0}, {}, {1}));
        CHECK(arc_weight(p, {0, 0}, {1, 1}, 2.0, spec, db.snapshot_before(2.0)) ==
              doctest::Approx(2.0 * 0.5 * 0.5));
    }
}

TEST_CASE("intensity basics") {
    const NetworkSpec spec = grid_spec(1, 1);
    NetworkParams params;
    params.nodes.push_back(plain_params(0.9, 0.0, 4.0));
    CovariateTracks tracks;
    const ModelView view{&spec, &params, &tracks};

    EventDatabase db(spec);
    db.add(make_event(0.4, {0, 0}));
    db.add(make_event(0.9, {0, 0}));

    SUBCASE("no triggering: baseline exactly") {
        CHECK(intensity({0, 0}, 2.0, view, db.snapshot_before(2.0)) == doctest::Approx(0.9));
    }

    SUBCASE("single event closed form") {
        NetworkParams trig;
        trig.nodes.push_back(plain_params(0.9, 1.3, 4.0));
        const ModelView tview{&spec, &trig, &tracks};
        EventDatabase one(spec);
        one.add(make_event(0.4, {0, 0}));
        const double t = 1.1;
        const double expected = 0.9 + 1.3 * std::exp(-4.0 * (t - 0.4));
        CHECK(intensity({0, 0}, t, tview, one.snapshot_before(t)) ==
              doctest::Approx(expected).epsilon(1e-14));
    }

    SUBCASE("history causality: later events do not matter") {
        NetworkParams trig;
        trig.nodes.push_back(plain_params(0.9, 1.3, 4.0));
        const ModelView tview{&spec, &trig, &tracks};
        const double t = 0.9; // equals the second event's time
        const double before = intensity({0, 0}, t, tview, db.snapshot_before(t));
        EventDatabase more = db;
        more.add(make_event(0.9, {0, 0}));
        more.add(make_event(5.0, {0, 0}));
        CHECK(intensity({0, 0}, t, tview, more.snapshot_before(t)) == before);
    }
}

TEST_CASE("intensity equals the naive double loop oracle") {
    // Table-1-style ground truth on simulated histories, plus random draws.
    for (uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL, 15ULL, 16ULL}) {
        const auto instance = oracle::random_instance(seed, 4, 15.0);
        if (instance.db.total_events() > 50 || instance.db.total_events() == 0) continue;
        const ModelView view = instance.scenario.view();
        std::mt19937_64 rng(seed ^ 0xabcd);
        std::uniform_real_distribution<double> when(0.1, 15.0);
        for (int trial = 0; trial < 20; ++trial) {
            const double t = when(rng);
            const Snapshot snap = instance.db.snapshot_before(t);
            for (int ui = 0; ui < view.spec->n_nodes(); ++ui) {
                const NodeId u = view.spec->node_at(ui);
                const double fast = intensity(u, t, view, snap);
                const double naive = oracle::naive_intensity(u, t, view, snap);
                CHECK(fast == doctest::Approx(naive).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("intensity never drops below the baseline") {
    const auto instance = oracle::random_instance(21, 4, 10.0);
    const ModelView view = instance.scenario.view();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> when(0.0, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double t = when(rng);
        for (int ui = 0; ui < view.spec->n_nodes(); ++ui) {
            const NodeId u = view.spec->node_at(ui);
            const double lambda = intensity(u, t, view, instance.db.snapshot_before(t));
            const double mu = baseline_rate(view.node_params(ui), view.node_track(ui), t);
            CHECK(lambda >= mu - 1e-15);
        }
    }
}

TEST_CASE("covariate track semantics") {
    CovariateTrack track;
    track.breakpoints = {1.0, 2.0, 3.0};
    track.values = {{10.0}, {20.0}, {30.0}};
    track.validate();
    CHECK(track.value_at(0.5)[0] == 10.0); // before the first breakpoint
    CHECK(track.value_at(1.0)[0] == 10.0); // at-or-before convention
    CHECK(track.value_at(1.5)[0] == 10.0);
    CHECK(track.value_at(2.0)[0] == 20.0);
    CHECK(track.value_at(7.0)[0] == 30.0);

    CovariateTrack bad;
    bad.breakpoints = {1.0, 1.0};
    bad.values = {{1.0}, {2.0}};
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);
}

TEST_CASE("event database invariants") {
    const NetworkSpec spec = grid_spec(2, 2);
    EventDatabase db(spec);
    db.add(make_event(1.0, {0, 0}));
    db.add(make_event(0.5, {1, 1}));
    db.add(make_event(1.0, {0, 1}));
    CHECK(db.total_events() == 3);
    CHECK(db.global_events().front().time == 0.5);

    // Snapshots are strict.
    CHECK(db.snapshot_before(1.0).size() == 1);
    CHECK(db.snapshot_through(1.0).size() == 3);

    CHECK_THROWS_AS(db.add(make_event(-1.0, {0, 0})), InvalidInputError);
    Event wrong_drug;
    wrong_drug.time = 1.0;
    wrong_drug.node = {0, 0};
    wrong_drug.drugs_involved = {1};
    CHECK_THROWS_AS(db.add(wrong_drug), InvalidInputError);
}
