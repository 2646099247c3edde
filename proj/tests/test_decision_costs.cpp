#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cavgame/decision_costs.hpp"
#include "cavgame/errors.hpp"

using namespace cavgame;

TEST_CASE("safety activation pattern on random sub-costs") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(0.0, 100.0);
    for (int i = 0; i < 1000; ++i) {
        const double log = d(rng), lat = d(rng), lk = d(rng), lc = d(rng);
        // keeping the lane: the lateral term is dropped exactly
        CHECK(safety_cost(0, log, lat, lk, lc) == log + lk + lc);
        CHECK(safety_cost(0, log, 0.0, lk, lc) == safety_cost(0, log, lat, lk, lc));
        // changing left: longitudinal and lane keeping are dropped exactly
        CHECK(safety_cost(-1, log, lat, lk, lc) == lat + lc);
        CHECK(safety_cost(-1, 0.0, lat, 0.0, lc) == safety_cost(-1, log, lat, lk, lc));
    }
}

TEST_CASE("step cost honours the activation pattern") {
    CostConfig cfg;
    StepCostInput in;
    in.host = {50, 0, 20, 0};
    in.lead = AgentPose{70, 0, 18, 0};
    in.neighbor = AgentPose{45, 4, 22, 0};
    in.lane_offset = 0.1;
    in.heading_error = 0.01;
    in.beta = 0;
    const auto keep = evaluate_step_cost(in, DrivingProfile::moderate(), cfg);
    CHECK(keep.lat == 0.0);
    CHECK(keep.log > 0.0);
    in.beta = -1;
    const auto change = evaluate_step_cost(in, DrivingProfile::moderate(), cfg);
    CHECK(change.lat > 0.0);
    CHECK(change.log == 0.0);
    const double lc = lane_change_safety_cost(50, 0, in.lead, in.neighbor, cfg.potential_field);
    CHECK(change.J_s * cfg.normalization.safety == doctest::Approx(change.lat + lc).epsilon(1e-12));
}

TEST_CASE("switch and pair terms") {
    CHECK(switch_eta(-2.0) == 1.0);
    CHECK(switch_eta(3.0) == 0.0);
    CHECK(switch_eta(0.0) == 0.5);
    CostWeights w;
    const AgentPose host{0, 0, 20, 0};
    // a slower lead closes the gap and adds the speed term
    const AgentPose slow{25, 0, 18, 0};
    const double ds = 20.0;
    CHECK(longitudinal_safety_cost(host, slow, w) ==
          doctest::Approx(w.varpi_v_log * 4.0 + w.varpi_s_log / (ds * ds + w.epsilon)).epsilon(1e-14));
    const AgentPose fast{25, 0, 22, 0};
    CHECK(longitudinal_safety_cost(host, fast, w) == doctest::Approx(w.varpi_s_log / (ds * ds + w.epsilon)));
    CHECK(longitudinal_safety_cost(host, std::nullopt, w) == 0.0);
    CHECK(gap_between({3, 4, 0, 0}, {0, 0, 0, 0}, 5.0) == doctest::Approx(0.0));
}

TEST_CASE("lateral term needs an existing target lane") {
    LaneModel lanes;
    CostWeights w;
    CHECK_THROWS_AS(lateral_safety_cost({}, AgentPose{}, 1, -1, lanes, w), MissingNeighbor);
    CHECK(lateral_safety_cost({}, std::nullopt, 2, -1, lanes, w) == 0.0);
}

TEST_CASE("potential field shape") {
    PotentialFieldParams pf;
    const AgentPose src{100, 0, 0, 0};
    CHECK(potential_field_value(100, 0, src, pf) == doctest::Approx(pf.hbar));
    CHECK(potential_field_value(110, 0, src, pf) < potential_field_value(105, 0, src, pf));
    CHECK(potential_field_value(100, 2, src, pf) < pf.hbar);
    // a moving source stretches the field ahead of it
    const AgentPose moving{100, 0, 20, 0};
    CHECK(potential_field_value(110, 0, moving, pf) > potential_field_value(90, 0, moving, pf));
    // heading rotates the field
    const AgentPose turned{0, 0, 0, M_PI / 2};
    const AgentPose origin{0, 0, 0, 0};
    CHECK(potential_field_value(0, 10, turned, pf) == doctest::Approx(potential_field_value(10, 0, origin, pf)));
    CHECK(lane_change_safety_cost(0, 0, std::nullopt, std::nullopt, pf) == 0.0);
}

TEST_CASE("comfort, efficiency and urgency") {
    CostWeights w;
    CHECK(comfort_cost(1.0, 2.0, w) == doctest::Approx(0.5 + 2.0));
    CHECK(efficiency_cost(20, 25.0, 30, w) == doctest::Approx(25.0));
    CHECK(efficiency_cost(20, 35.0, 30, w) == doctest::Approx(100.0));
    CHECK(efficiency_cost(20, std::nullopt, 30, w) == doctest::Approx(100.0));
    LaneModel lanes;
    CHECK(merge_urgency_cost(-10, lanes, w) == 0.0);
    CHECK(merge_urgency_cost(100, lanes, w) == doctest::Approx(w.varpi_ramp * 0.25));
}

TEST_CASE("profiles weight the three objectives") {
    const auto b = total_cost(DrivingProfile::conservative(), 1.0, 2.0, 3.0);
    CHECK(b.J_total == doctest::Approx(0.7 + 0.4 + 0.3));
    CHECK(DrivingProfile::from_name("aggressive").omega_e == 0.8);
    CHECK_THROWS_AS(DrivingProfile::from_name("sporty"), std::invalid_argument);
}

TEST_CASE("lane change reference endpoints") {
    LaneModel lanes;
    const double y2 = lanes.center_y(2), y1 = lanes.center_y(1);
    CHECK(lanes.center_y(1) == 4.0);
    CHECK(lanes.center_y(3) == -4.0);
    CHECK(lanes.nearest_lane(-3.0) == 3);
    const auto start = lanes.change_reference(2, 1, 0.0, 20);
    CHECK(start.y == y2);
    CHECK(start.phi == 0.0);
    const auto end = lanes.change_reference(2, 1, lanes.change_duration, 20);
    CHECK(end.y == doctest::Approx(y1).epsilon(1e-14));
    CHECK(end.phi == doctest::Approx(0.0));
    const auto mid = lanes.change_reference(2, 1, lanes.change_duration / 2, 20);
    CHECK(mid.y == doctest::Approx(0.5 * (y1 + y2)));
    CHECK(mid.phi > 0.0);
    CHECK(lanes.change_reference(2, 1, 10 * lanes.change_duration, 20).y == doctest::Approx(y1));
    CHECK_THROWS_AS(lanes.center_y(4), std::out_of_range);
}

namespace {

struct Straight {
    std::vector<VehicleState> states;
    std::vector<ControlInput> controls;
};

Straight straight(int n, double v, double ax) {
    Straight s;
    VehicleState x{v, 0, 0, 0, 0, 0};
    for (int k = 0; k < n; ++k) {
        s.states.push_back(x);
        s.controls.push_back({ax, 0.0});
        x.X += x.vx * 0.1 + 0.5 * ax * 0.01;
        x.vx += ax * 0.1;
    }
    s.states.push_back(x);
    return s;
}

}  // namespace

TEST_CASE("constraints flag excesses and nothing else") {
    ConstraintLimits lim;
    auto s = straight(5, 20, 0.0);
    TrajectoryCheck t{s.states, s.controls, {}, std::nullopt, 0.1, 0.0, 30.0, true, {}};
    CHECK(check_constraints(t, lim).feasible());

    // an acceleration jump breaks the increment and jerk bounds once
    s = straight(5, 20, 1.0);
    t.states = s.states;
    t.controls = s.controls;
    const auto r = check_constraints(t, lim);
    int incr = 0, jerk = 0;
    for (const auto& v : r.violations) {
        if (v.id == ConstraintId::AccelIncrement) ++incr;
        if (v.id == ConstraintId::JerkX) ++jerk;
    }
    CHECK(incr == 1);
    CHECK(jerk == 1);
    CHECK(constraint_violation(t, lim) == doctest::Approx(r.total_magnitude()));
    const auto split = split_violation(t, lim);
    CHECK(split.braking == 0.0);

    // a short gap is relieved by braking
    s = straight(5, 20, 0.0);
    t.states = s.states;
    t.controls = s.controls;
    std::vector<double> gaps(5, 1.0);
    t.gaps = gaps;
    const auto g = split_violation(t, lim);
    CHECK(g.total == doctest::Approx(5 * (lim.min_gap - 1.0)));
    CHECK(g.braking == g.total);

    // lane offset only counts while lane keeping
    for (auto& st : s.states) st.Y = 0.5;
    t.states = s.states;
    t.gaps = {};
    CHECK_FALSE(check_constraints(t, lim).feasible());
    t.lane_keeping = false;
    CHECK(check_constraints(t, lim).feasible());

    t.states = std::span<const VehicleState>(s.states.data(), 2);
    CHECK_THROWS_AS(check_constraints(t, lim), TooShort);
}

TEST_CASE("braking relief classification") {
    CHECK(relieved_by_braking(ConstraintId::Gap));
    CHECK(relieved_by_braking(ConstraintId::Speed));
    CHECK(relieved_by_braking(ConstraintId::AccelY));
    CHECK(relieved_by_braking(ConstraintId::Curvature));
    CHECK_FALSE(relieved_by_braking(ConstraintId::LaneOffset));
    CHECK_FALSE(relieved_by_braking(ConstraintId::JerkX));
    CHECK_FALSE(relieved_by_braking(ConstraintId::SteeringIncrement));
    CHECK(constraint_name(ConstraintId::JerkY) == "jerk_y");
}

TEST_CASE("curvature of a circle") {
    const double R = 20.0, a = 0.05;
    const double k = discrete_curvature(R, 0, R * std::cos(a), R * std::sin(a), R * std::cos(2 * a), R * std::sin(2 * a));
    CHECK(k == doctest::Approx(1.0 / R).epsilon(1e-2));
    CHECK(discrete_curvature(0, 0, 1, 0, 2, 0) == 0.0);
}
