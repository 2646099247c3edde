#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "cavgame/errors.hpp"
#include "cavgame/scenario.hpp"
#include "cavgame/simulation.hpp"
#include "cavgame/trace_io.hpp"

using namespace cavgame;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(CAVGAME_SOURCE_DIR) / "scenarios";

const char* kMinimal = R"({
  "name": "pair",
  "duration": 0.5,
  "vehicles": [
    {"id": "A", "lane": 2, "X": 0, "Y": 0, "vx": 20},
    {"id": "L", "role": "lead", "lane": 2, "X": 40, "Y": 0, "vx": 20}
  ]
})";

Scenario short_run(const std::string& name, double duration) {
    Scenario s = load_scenario(kScenarios / (name + ".json"));
    s.duration = duration;
    return s;
}

std::string with(const std::string& base, const std::string& from, const std::string& to) {
    std::string s = base;
    s.replace(s.find(from), from.size(), to);
    return s;
}

}  // namespace

TEST_CASE("bundled scenarios load") {
    for (const char* n : {"case1_a", "case1_b", "case2_a", "case2_b", "case2_c"}) {
        const Scenario s = load_scenario(kScenarios / (std::string(n) + ".json"));
        CHECK(s.name == n);
        CHECK(s.steps() > 0);
        // the echo parses back to the same configuration
        CHECK(scenario_to_json(parse_scenario(scenario_to_json(s))) == scenario_to_json(s));
    }
}

TEST_CASE("schema errors name the offending field") {
    try {
        parse_scenario(with(kMinimal, "\"duration\"", "\"durration\""));
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.path() == "/durration");
    }
    try {
        parse_scenario(with(kMinimal, "\"vx\": 20}", "\"vx\": 20, \"color\": 1}"));
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.path() == "/vehicles/0/color");
    }
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"vx\": 20}", "\"vx\": \"fast\"}")), SchemaError);
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"name\": \"pair\",", "")), SchemaError);
    CHECK_THROWS_AS(parse_scenario("{"), SchemaError);
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"vx\": 20}", "\"vx\": 20, \"profile\": \"sporty\"}")), SchemaError);
}

TEST_CASE("semantic errors") {
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"id\": \"L\"", "\"id\": \"A\"")), SemanticError);
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"X\": 40", "\"X\": 2")), SemanticError);
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"Y\": 0, \"vx\": 20}", "\"Y\": 4, \"vx\": 20}")), SemanticError);
    CHECK_THROWS_AS(parse_scenario(with(kMinimal, "\"duration\": 0.5", "\"duration\": -1")), SemanticError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), IoError);
}

TEST_CASE("minimal scenario runs and the trace has the fixed header") {
    const RunResult r = run_closed_loop(parse_scenario(kMinimal));
    CHECK_FALSE(r.aborted());
    CHECK(r.summary.steps == 5);
    const std::string csv = trace_to_csv(r.trace);
    CHECK(csv.substr(0, csv.find('\n')) == kTraceHeader);
    // one row per vehicle per step
    CHECK(r.trace.rows.size() == 10);
    for (const auto& row : r.trace.rows) {
        if (row.vehicle_id == "L") CHECK(row.coalition_id == -1);
    }
}

TEST_CASE("same seed gives a byte-identical trace, also with threads") {
    Scenario s = short_run("case2_a", 0.4);
    const std::string a = trace_to_csv(run_closed_loop(s).trace);
    const std::string b = trace_to_csv(run_closed_loop(s).trace);
    CHECK(a == b);
    s.planner.solver.threads = 3;
    const std::string c = trace_to_csv(run_closed_loop(s).trace);
    CHECK(a == c);
}

TEST_CASE("trace replay rebuilds the summary") {
    const Scenario s = short_run("case1_a", 0.5);
    const RunResult r = run_closed_loop(s);
    std::istringstream in(trace_to_csv(r.trace));
    const Trace back = read_trace_csv(in);
    CHECK(trace_to_csv(back) == trace_to_csv(r.trace));
    const RunSummary again = summarize_trace(back, &s);
    REQUIRE(again.vehicles.size() == r.summary.vehicles.size());
    for (size_t i = 0; i < again.vehicles.size(); ++i) {
        CHECK(again.vehicles[i].id == r.summary.vehicles[i].id);
        CHECK(again.vehicles[i].rms_cost == doctest::Approx(r.summary.vehicles[i].rms_cost).epsilon(1e-12));
        CHECK(again.vehicles[i].min_gap == doctest::Approx(r.summary.vehicles[i].min_gap).epsilon(1e-12));
    }
}

TEST_CASE("malformed trace files") {
    std::istringstream bad_header("t,vehicle_id\n0,A\n");
    CHECK_THROWS(read_trace_csv(bad_header));
    CHECK_THROWS_AS(import_trace("/nonexistent/trace.csv"), IoError);
}

TEST_CASE("formation modes are reported in the timeline") {
    Scenario s = short_run("case1_b", 0.3);
    s.formation.mode = FormationMode::Grand;
    const RunResult g = run_closed_loop(s);
    for (const auto& rec : g.summary.timeline) CHECK(rec.partition.find("} {") == std::string::npos);
    s.formation.mode = FormationMode::Single;
    const RunResult single = run_closed_loop(s);
    for (const auto& rec : single.summary.timeline) CHECK(rec.type != CoalitionType::Grand);
    CHECK(g.summary.formation == "grand");
}

TEST_CASE("body gap") {
    const VehicleParams p;
    CHECK(body_gap({20, 0, 0, 0, 0, 0}, {20, 0, 0, 0, 10, 0}, p) == doctest::Approx(5.0));
    CHECK(body_gap({20, 0, 0, 0, 0, 0}, {20, 0, 0, 0, 0, 4}, p) == doctest::Approx(2.2));
    CHECK(body_gap({20, 0, 0, 0, 0, 0}, {20, 0, 0, 0, 3, 1}, p) < 0.0);
}
