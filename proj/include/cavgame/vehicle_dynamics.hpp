#pragma once

#include <Eigen/Dense>

namespace cavgame {

using StateVector = Eigen::Matrix<double, 6, 1>;
using InputVector = Eigen::Matrix<double, 2, 1>;
using StateMatrix = Eigen::Matrix<double, 6, 6>;
using InputMatrix = Eigen::Matrix<double, 6, 2>;

inline constexpr double kVxFloor = 1.0;

struct VehicleState {
    double vx = 0.0;   // longitudinal velocity, m/s
    double vy = 0.0;   // lateral velocity, m/s
    double r = 0.0;    // yaw rate, rad/s
    double phi = 0.0;  // yaw angle, rad
    double X = 0.0;
    double Y = 0.0;

    StateVector vector() const;
    static VehicleState from_vector(const StateVector& v);
    bool finite() const;
};

struct ControlInput {
    double ax = 0.0;       // m/s^2
    double delta_f = 0.0;  // front steering angle, rad

    InputVector vector() const;
    static ControlInput from_vector(const InputVector& v);
};

struct VehicleParams {
    double m = 1500.0;
    double Iz = 2500.0;
    double lf = 1.2;
    double lr = 1.6;
    double Cf = 70000.0;
    double Cr = 70000.0;
    double length = 5.0;
    double width = 1.8;  // only used for collision checks

    void validate() const;
};

struct Jacobians {
    StateMatrix A;
    InputMatrix B;
};

struct DiscreteModel {
    StateMatrix Ad;
    InputMatrix Bd;
};

// Discretization of x' = A x + B u + c. The drift column is
// integral_0^dt exp(A s) ds * c.
struct AffineDiscreteModel {
    StateMatrix Ad;
    InputMatrix Bd;
    StateVector drift;
};

struct LinearModel {
    StateMatrix A;
    InputMatrix B;
    StateMatrix Ad;
    InputMatrix Bd;
    double dt = 0.0;
};

StateVector continuous_derivative(const VehicleState& s, const ControlInput& u, const VehicleParams& p);

Jacobians linearize(const VehicleState& s, const ControlInput& u, const VehicleParams& p);

DiscreteModel discretize(const StateMatrix& A, const InputMatrix& B, double dt);

AffineDiscreteModel discretize_affine(const StateMatrix& A, const InputMatrix& B, const StateVector& c, double dt);

LinearModel build_linear_model(const VehicleState& s, const ControlInput& u, const VehicleParams& p, double dt);

// RK4 over one step with u held, split into substeps at low speed. With clamp_floor the velocity floor is applied
// to every stage and to the result; otherwise VelocityFloor propagates.
VehicleState step_plant(const VehicleState& s, const ControlInput& u, const VehicleParams& p, double dt,
                        bool clamp_floor = true);

}  // namespace cavgame
