#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cavgame/errors.hpp"
#include "cavgame/vehicle_dynamics.hpp"
#include "oracles.hpp"

using namespace cavgame;

using oracle::random_control;
using oracle::random_state;

TEST_CASE("discretization matches a fine integration oracle") {
    std::mt19937_64 rng(11);
    const VehicleParams p;
    for (int i = 0; i < 100; ++i) {
        const auto J = linearize(random_state(rng), random_control(rng), p);
        const auto D = discretize(J.A, J.B, 0.1);
        const auto O = oracle::integrate(J.A, J.B, 0.1, 1000);
        CHECK((D.Ad - O.Ad).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((D.Bd - O.Bd).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("discretization of a double integrator is exact") {
    StateMatrix A = StateMatrix::Zero();
    A(4, 0) = 1.0;
    InputMatrix B = InputMatrix::Zero();
    B(0, 0) = 1.0;
    const auto D = discretize(A, B, 0.5);
    CHECK(D.Ad(4, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(D.Bd(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(D.Bd(4, 0) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("affine discretization drift is the integrated constant") {
    std::mt19937_64 rng(5);
    const VehicleParams p;
    const auto J = linearize(random_state(rng), random_control(rng), p);
    StateVector c;
    c << 0.3, -0.2, 0.01, 0.0, 1.0, -0.5;
    const auto aff = discretize_affine(J.A, J.B, c, 0.1);
    // a constant drift is a constant input through an extra column
    Eigen::Matrix<double, 6, 2> Bc = Eigen::Matrix<double, 6, 2>::Zero();
    Bc.col(0) = c;
    const auto O = oracle::integrate(J.A, Bc, 0.1, 1000);
    CHECK((aff.drift - O.Bd.col(0)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((aff.Ad - O.Ad).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("analytic Jacobians match central differences") {
    std::mt19937_64 rng(3);
    const VehicleParams p;
    for (int i = 0; i < 50; ++i) {
        const VehicleState s = random_state(rng);
        const ControlInput u = random_control(rng);
        const auto J = linearize(s, u, p);
        const auto N = oracle::finite_difference(s, u, p);
        CHECK(oracle::relative_error(J.A, N.A) < 1e-5);
        CHECK(oracle::relative_error(J.B, N.B) < 1e-5);
    }
}

TEST_CASE("straight driving keeps a straight line") {
    const VehicleParams p;
    VehicleState s{20.0, 0.0, 0.0, 0.0, 0.0, 4.0};
    for (int i = 0; i < 10; ++i) s = step_plant(s, {1.0, 0.0}, p, 0.1);
    CHECK(s.vx == doctest::Approx(21.0).epsilon(1e-12));
    CHECK(s.X == doctest::Approx(20.0 + 0.5).epsilon(1e-12));
    CHECK(s.Y == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(s.vy == 0.0);
}

TEST_CASE("plant stays bounded near the velocity floor") {
    const VehicleParams p;
    VehicleState s{1.5, 0.05, 0.02, 0.01, 0.0, 0.0};
    for (int i = 0; i < 50; ++i) s = step_plant(s, {-4.0, 0.01}, p, 0.1);
    CHECK(s.finite());
    CHECK(s.vx == doctest::Approx(kVxFloor));
    CHECK(std::abs(s.vy) < 1.0);
    CHECK(std::abs(s.r) < 1.0);
}

TEST_CASE("substepped plant agrees with a much finer integration") {
    const VehicleParams p;
    const VehicleState s{2.0, 0.1, 0.05, 0.02, 0.0, 0.0};
    const ControlInput u{0.5, 0.02};
    const VehicleState coarse = step_plant(s, u, p, 0.1);
    VehicleState fine = s;
    for (int i = 0; i < 100; ++i) fine = step_plant(fine, u, p, 0.001);
    CHECK((coarse.vector() - fine.vector()).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("input errors") {
    const VehicleParams p;
    CHECK_THROWS_AS(continuous_derivative({0.5, 0, 0, 0, 0, 0}, {}, p), VelocityFloor);
    CHECK_THROWS_AS(continuous_derivative({NAN, 0, 0, 0, 0, 0}, {}, p), NonfiniteInput);
    CHECK_THROWS_AS(step_plant({10, 0, 0, 0, 0, 0}, {INFINITY, 0}, p, 0.1), NonfiniteInput);
    CHECK_THROWS_AS(discretize(StateMatrix::Zero(), InputMatrix::Zero(), 0.0), std::invalid_argument);
    VehicleParams bad;
    bad.m = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    // without the clamp a braking step through the floor raises
    CHECK_THROWS_AS(step_plant({1.1, 0, 0, 0, 0, 0}, {-4.0, 0}, p, 0.1, false), VelocityFloor);
}
