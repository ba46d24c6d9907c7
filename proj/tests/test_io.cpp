#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "stemmed/io.hpp"
#include "stemmed/simulate.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace stemmed;
using testutil::grid_spec;
using testutil::make_event;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("stemmed_io_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("events file round trip") {
    TempDir dir;
    const Scenario scenario = build_scenario(4, 25.0, 31);
    const EventDatabase db = thinning_simulate(scenario, 0.0, 25.0);
    REQUIRE(db.total_events() > 0);

    const std::string path = dir.file("events.tsv");
    write_events_file(path, scenario.spec, db);
    const EventDatabase back = read_events_file(path, scenario.spec);
    REQUIRE(back.total_events() == db.total_events());
    for (std::size_t i = 0; i < db.global_events().size(); ++i) {
        const Event& a = db.global_events()[i];
        const Event& b = back.global_events()[i];
        CHECK(a.time == b.time); // lossless decimal round trip
        CHECK(a.node == b.node);
        CHECK(a.features == b.features);
        CHECK(a.drugs_involved == b.drugs_involved);
    }
}

TEST_CASE("events file reports malformed rows with line numbers") {
    TempDir dir;
    const NetworkSpec spec = grid_spec(1, 1);
    const std::string path = dir.file("bad.tsv");
    {
        std::ofstream out(path);
        out << "#stemmed-events v1\n";
        out << "1.5\tC0\tD0\t-\tD0\n";
        out << "oops\tC0\tD0\t-\tD0\n";
    }
    try {
        read_events_file(path, spec);
        FAIL("expected a parse error");
    } catch (const IoError& err) {
        CHECK(std::string(err.what()).find(":3:") != std::string::npos);
    }

    const std::string missing_header = dir.file("nohdr.tsv");
    {
        std::ofstream out(missing_header);
        out << "1.5\tC0\tD0\t-\tD0\n";
    }
    CHECK_THROWS_AS(read_events_file(missing_header, spec), IoError);
}

TEST_CASE("covariates file round trip") {
    TempDir dir;
    const Scenario scenario = build_scenario(2, 10.0, 8);
    const std::string path = dir.file("covariates.tsv");
    write_covariates_file(path, scenario.spec, scenario.tracks);
    const CovariateTracks back = read_covariates_file(path, scenario.spec);
    REQUIRE(back.tracks.size() == scenario.tracks.tracks.size());
    for (std::size_t i = 0; i < back.tracks.size(); ++i) {
        CHECK(back.tracks[i].breakpoints == scenario.tracks.tracks[i].breakpoints);
        CHECK(back.tracks[i].values == scenario.tracks.tracks[i].values);
    }
}

TEST_CASE("distances file round trip") {
    TempDir dir;
    const Scenario scenario = build_scenario(9, 10.0, 77);
    const std::string path = dir.file("distances.tsv");
    write_distances_file(path, scenario.spec);
    std::vector<std::string> communities;
    std::vector<std::vector<double>> distances;
    read_distances_file(path, communities, distances);
    CHECK(communities == scenario.spec.communities);
    CHECK(distances == scenario.spec.distances);
}

TEST_CASE("params json round trip") {
    TempDir dir;
    const Scenario scenario = build_scenario(4, 10.0, 12);
    const std::string path = dir.file("params.json");
    write_params_json(path, scenario.spec, scenario.params);
    const NetworkParams back = read_params_json(path, scenario.spec);
    REQUIRE(back.nodes.size() == scenario.params.nodes.size());
    for (std::size_t i = 0; i < back.nodes.size(); ++i) {
        CHECK(back.nodes[i].gamma == scenario.params.nodes[i].gamma);
        CHECK(back.nodes[i].beta == scenario.params.nodes[i].beta);
        CHECK(back.nodes[i].alpha == scenario.params.nodes[i].alpha);
        CHECK(back.nodes[i].delta_g == scenario.params.nodes[i].delta_g);
        CHECK(back.nodes[i].omega == scenario.params.nodes[i].omega);
        CHECK(back.nodes[i].delta_k == scenario.params.nodes[i].delta_k);
    }
}

TEST_CASE("scenario json round trip") {
    TempDir dir;
    const Scenario scenario = build_scenario(6, 33.0, 5150);
    const std::string path = dir.file("scenario.json");
    write_scenario_json(path, scenario);
    const Scenario back = read_scenario_json(path);
    CHECK(back.spec.communities == scenario.spec.communities);
    CHECK(back.spec.drugs == scenario.spec.drugs);
    CHECK(back.spec.distances == scenario.spec.distances);
    CHECK(back.horizon == scenario.horizon);
    CHECK(back.seed == scenario.seed);
    CHECK(back.marks.n_features == scenario.marks.n_features);
    REQUIRE(back.tracks.tracks.size() == scenario.tracks.tracks.size());
    CHECK(back.tracks.tracks[3].values == scenario.tracks.tracks[3].values);
    REQUIRE(back.params.nodes.size() == scenario.params.nodes.size());
    CHECK(back.params.nodes[5].delta_k == scenario.params.nodes[5].delta_k);
}

TEST_CASE("empty events file keeps its header") {
    TempDir dir;
    const NetworkSpec spec = grid_spec(1, 1);
    EventDatabase db(spec);
    const std::string path = dir.file("empty.tsv");
    write_events_file(path, spec, db);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "#stemmed-events v1");
    CHECK(read_events_file(path, spec).total_events() == 0);
}
