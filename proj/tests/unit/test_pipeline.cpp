#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "sres/pipeline.hpp"

using namespace sres;
namespace fs = std::filesystem;

namespace {

json two_atom_scenario() {
    return json::parse(R"({
        "window": {"kind": "gaussian", "sigma": 0.2, "M": 6},
        "truth": {"atoms": [{"t": 0.3, "s": 0.3, "w": 1.0}, {"t": 0.7, "s": 0.6, "w": 1.5}]},
        "grid_n": 96,
        "epsilon": 0.1,
        "certificates": true
    })");
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("sres_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("generated truths respect the separation floor") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        TruthGenerator g;
        g.K = 3;
        g.sep_floor = 0.15;
        g.seed = seed;
        AtomicMeasure x = generate_truth(g);
        REQUIRE(x.size() == 3);
        CHECK(sep(x) >= 0.15 - 1e-12);
        for (const Atom& a : x.atoms()) {
            CHECK(a.w >= 0.5);
            CHECK(a.w <= 2.0);
        }
    }
    TruthGenerator g;
    g.K = 2;
    g.on_grid = true;
    g.seed = 4;
    for (const Atom& a : generate_truth(g, 64).atoms()) {
        CHECK(std::abs(a.loc.t * 63 - std::round(a.loc.t * 63)) < 1e-9);
        CHECK(std::abs(a.loc.s * 63 - std::round(a.loc.s * 63)) < 1e-9);
    }
    TruthGenerator bad;
    bad.K = 5;
    bad.sep_floor = 0.2;
    CHECK_THROWS_AS(generate_truth(bad), ConfigError);
}

TEST_CASE("noiseless two-atom pipeline meets the certified bound") {
    Scenario sc = parse_scenario(two_atom_scenario());
    fs::path out = scratch("noiseless");
    PipelineOutcome o = run_pipeline(sc, out);
    const json& r = o.report;
    CHECK(r.at("certificates").at("status") == "verified");
    CHECK(r.at("bound_satisfied") == true);
    CHECK(r.at("d_gw").get<double>() <= r.at("theorem_rhs").get<double>());
    CHECK(r.at("K") == 2);
    CHECK(r.at("delta").get<double>() == 0.0);
    CHECK(fs::exists(out / "y.csv"));
    CHECK(fs::exists(out / "xhat.json"));
    CHECK(fs::exists(out / "report.json"));
    Observation back = read_observation(out / "y.csv");
    CHECK((back.y - o.observation.y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty truth recovers nothing") {
    json j = two_atom_scenario();
    j["truth"] = {{"atoms", json::array()}};
    j["certificates"] = false;
    PipelineOutcome o = run_pipeline(parse_scenario(j));
    CHECK(o.report.at("d_gw").get<double>() <= 1e-12);
    CHECK(tv_norm(o.estimate) <= 1e-12);
}

TEST_CASE("pipeline runs are deterministic") {
    json j = two_atom_scenario();
    j["delta"] = 0.02;
    j["noise_seed"] = 11;
    Scenario sc = parse_scenario(j);
    PipelineOutcome a = run_pipeline(sc), b = run_pipeline(sc);
    CHECK(a.report.dump() == b.report.dump());
    CHECK(measure_to_json(a.estimate).dump() == measure_to_json(b.estimate).dump());
}

TEST_CASE("noise level follows the scenario") {
    json j = two_atom_scenario();
    j["delta"] = 0.05;
    j["certificates"] = false;
    PipelineOutcome o = run_pipeline(parse_scenario(j));
    CHECK(o.observation.delta == 0.05);
    CHECK(o.report.at("deltap").get<double>() >= 0.05);
}

TEST_CASE("scenario parsing rejects bad input") {
    json j = two_atom_scenario();
    CHECK_NOTHROW(parse_scenario(j));
    json a = j;
    a["delta"] = -1;
    CHECK_THROWS_AS(parse_scenario(a), ConfigError);
    json b = j;
    b["epsilon"] = 0.0;
    CHECK_THROWS_AS(parse_scenario(b), ConfigError);
    json c = j;
    c.erase("truth");
    CHECK_THROWS_AS(parse_scenario(c), ConfigError);
    json d = j;
    d["generator"] = {{"K", 2}};
    CHECK_THROWS_AS(parse_scenario(d), ConfigError);
    json e = j;
    e["window"] = {{"kind", "sinc"}};
    CHECK_THROWS_AS(parse_scenario(e), ConfigError);
    json f = j;
    f["deltap"] = {{"rule", "magic"}};
    CHECK_THROWS_AS(parse_scenario(f), ConfigError);
    json g = j;
    g["delta"] = 0.1;
    g["deltap"] = 0.05;
    CHECK_THROWS_AS(parse_scenario(g), ConfigError);
    json h = j;
    h["window"] = "does_not_exist.json";
    CHECK_THROWS_AS(parse_scenario(h), ConfigError);
}

TEST_CASE("scenario round trip") {
    json j = two_atom_scenario();
    j["delta"] = 0.01;
    j["deltap"] = {{"rule", "multiplicative"}, {"value", 2.0}};
    Scenario a = parse_scenario(j);
    Scenario b = parse_scenario(scenario_to_json(a));
    CHECK(b.delta == a.delta);
    CHECK(b.deltap_mode == a.deltap_mode);
    CHECK(b.deltap_value == a.deltap_value);
    CHECK(b.eps == a.eps);
    CHECK(b.grid_n == a.grid_n);
    CHECK(b.truth->size() == 2);
}

TEST_CASE("a single-value sweep matches a direct run") {
    json j = two_atom_scenario();
    j["certificates"] = false;
    j["noise_seed"] = 3;
    Scenario sc = parse_scenario(j);
    std::vector<SweepRow> rows = run_sweep(sc, "delta", {0.03}, 2);
    REQUIRE(rows.size() == 1);
    Scenario direct = sc;
    direct.delta = 0.03;
    PipelineOutcome o = run_pipeline(direct);
    CHECK(rows[0].runs == 1);
    CHECK(rows[0].failed == 0);
    CHECK(rows[0].d_gw_mean == doctest::Approx(o.report.at("d_gw").get<double>()));

    fs::path out = scratch("sweep");
    write_sweep_csv(out / "sweep.csv", rows);
    std::ifstream in(out / "sweep.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "value,d_gw_mean,d_gw_max,residual,theorem_rhs,runs,failed,bound_satisfied,error");
    CHECK_THROWS_AS(run_sweep(sc, "colour", {1.0}), ConfigError);
}

TEST_CASE("sweep results do not depend on the thread count") {
    json j = two_atom_scenario();
    j["certificates"] = false;
    j["repeats"] = 2;
    Scenario sc = parse_scenario(j);
    auto one = run_sweep(sc, "delta", {0.0, 0.02, 0.05}, 1);
    auto four = run_sweep(sc, "delta", {0.0, 0.02, 0.05}, 4);
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].d_gw == four[i].d_gw);
        CHECK(one[i].runs == 2);
    }
}
