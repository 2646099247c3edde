#include "cavgame/vehicle_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "cavgame/errors.hpp"

namespace cavgame {

StateVector VehicleState::vector() const {
    StateVector v;
    v << vx, vy, r, phi, X, Y;
    return v;
}

VehicleState VehicleState::from_vector(const StateVector& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
}

bool VehicleState::finite() const {
    return std::isfinite(vx) && std::isfinite(vy) && std::isfinite(r) && std::isfinite(phi) && std::isfinite(X) &&
           std::isfinite(Y);
}

InputVector ControlInput::vector() const { return InputVector(ax, delta_f); }

ControlInput ControlInput::from_vector(const InputVector& v) { return {v(0), v(1)}; }

void VehicleParams::validate() const {
    if (!(m > 0 && Iz > 0 && lf > 0 && lr > 0 && Cf > 0 && Cr > 0 && length > 0 && width > 0)) {
        throw std::invalid_argument("vehicle parameters must be positive");
    }
}

namespace {

void check_inputs(const VehicleState& s, const ControlInput& u) {
    if (!s.finite() || !std::isfinite(u.ax) || !std::isfinite(u.delta_f)) {
        throw NonfiniteInput("non-finite state or control");
    }
    if (s.vx < kVxFloor) {
        throw VelocityFloor("vx=" + std::to_string(s.vx) + " below floor");
    }
}

}  // namespace

StateVector continuous_derivative(const VehicleState& s, const ControlInput& u, const VehicleParams& p) {
    check_inputs(s, u);
    const double cd = std::cos(u.delta_f);
    const double alpha_f = -u.delta_f + (s.vy + p.lf * s.r) / s.vx;
    const double alpha_r = (s.vy - p.lr * s.r) / s.vx;
    const double fyf = -p.Cf * alpha_f;
    const double fyr = -p.Cr * alpha_r;
    const double cp = std::cos(s.phi);
    const double sp = std::sin(s.phi);

    StateVector dx;
    dx << s.vy * s.r + u.ax,
          -s.vx * s.r + (fyf * cd + fyr) / p.m,
          (p.lf * fyf * cd - p.lr * fyr) / p.Iz,
          s.r,
          s.vx * cp - s.vy * sp,
          s.vx * sp + s.vy * cp;
    return dx;
}

Jacobians linearize(const VehicleState& s, const ControlInput& u, const VehicleParams& p) {
    check_inputs(s, u);
    const double vx = s.vx;
    const double cd = std::cos(u.delta_f);
    const double sd = std::sin(u.delta_f);
    const double cp = std::cos(s.phi);
    const double sp = std::sin(s.phi);
    const double alpha_f = -u.delta_f + (s.vy + p.lf * s.r) / vx;

    // slip-angle partials
    const double daf_dvx = -(s.vy + p.lf * s.r) / (vx * vx);
    const double dar_dvx = -(s.vy - p.lr * s.r) / (vx * vx);
    const double daf_dvy = 1.0 / vx;
    const double dar_dvy = 1.0 / vx;
    const double daf_dr = p.lf / vx;
    const double dar_dr = -p.lr / vx;

    // Fyf*cos(delta) and Fyr partials
    const double kf = -p.Cf * cd;
    const double kr = -p.Cr;

    Jacobians J;
    J.A.setZero();
    J.B.setZero();

    J.A(0, 1) = s.r;
    J.A(0, 2) = s.vy;
    J.B(0, 0) = 1.0;

    J.A(1, 0) = -s.r + (kf * daf_dvx + kr * dar_dvx) / p.m;
    J.A(1, 1) = (kf * daf_dvy + kr * dar_dvy) / p.m;
    J.A(1, 2) = -vx + (kf * daf_dr + kr * dar_dr) / p.m;
    J.B(1, 1) = p.Cf * (cd + alpha_f * sd) / p.m;

    J.A(2, 0) = (p.lf * kf * daf_dvx - p.lr * kr * dar_dvx) / p.Iz;
    J.A(2, 1) = (p.lf * kf * daf_dvy - p.lr * kr * dar_dvy) / p.Iz;
    J.A(2, 2) = (p.lf * kf * daf_dr - p.lr * kr * dar_dr) / p.Iz;
    J.B(2, 1) = p.lf * p.Cf * (cd + alpha_f * sd) / p.Iz;

    J.A(3, 2) = 1.0;

    J.A(4, 0) = cp;
    J.A(4, 1) = -sp;
    J.A(4, 3) = -vx * sp - s.vy * cp;

    J.A(5, 0) = sp;
    J.A(5, 1) = cp;
    J.A(5, 3) = vx * cp - s.vy * sp;
    return J;
}

DiscreteModel discretize(const StateMatrix& A, const InputMatrix& B, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    Eigen::Matrix<double, 8, 8> M = Eigen::Matrix<double, 8, 8>::Zero();
    M.topLeftCorner<6, 6>() = A * dt;
    M.topRightCorner<6, 2>() = B * dt;
    const Eigen::Matrix<double, 8, 8> E = M.exp();
    return {E.topLeftCorner<6, 6>(), E.topRightCorner<6, 2>()};
}

AffineDiscreteModel discretize_affine(const StateMatrix& A, const InputMatrix& B, const StateVector& c, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    Eigen::Matrix<double, 9, 9> M = Eigen::Matrix<double, 9, 9>::Zero();
    M.topLeftCorner<6, 6>() = A * dt;
    M.block<6, 2>(0, 6) = B * dt;
    M.block<6, 1>(0, 8) = c * dt;
    const Eigen::Matrix<double, 9, 9> E = M.exp();
    return {E.topLeftCorner<6, 6>(), E.block<6, 2>(0, 6), E.block<6, 1>(0, 8)};
}

LinearModel build_linear_model(const VehicleState& s, const ControlInput& u, const VehicleParams& p, double dt) {
    const Jacobians J = linearize(s, u, p);
    const DiscreteModel D = discretize(J.A, J.B, dt);
    return {J.A, J.B, D.Ad, D.Bd, dt};
}

VehicleState step_plant(const VehicleState& s, const ControlInput& u, const VehicleParams& p, double dt,
                        bool clamp_floor) {
    if (dt < 0.0) throw std::invalid_argument("dt must be non-negative");
    if (dt == 0.0) return s;
    auto eval = [&](const StateVector& x) {
        VehicleState st = VehicleState::from_vector(x);
        if (clamp_floor && st.vx < kVxFloor) st.vx = kVxFloor;
        return continuous_derivative(st, u, p);
    };
    // the tire-force modes stiffen as 1/vx; RK4 needs h*rate below about 2.8
    const double v_low = std::max(kVxFloor, s.vx - std::abs(u.ax) * dt);
    const double rate = std::max((p.Cf + p.Cr) / (p.m * v_low),
                                 (p.lf * p.lf * p.Cf + p.lr * p.lr * p.Cr) / (p.Iz * v_low));
    const int substeps = std::max(1, static_cast<int>(std::ceil(dt * rate / 1.5)));
    const double h = dt / substeps;
    StateVector x = s.vector();
    for (int i = 0; i < substeps; ++i) {
        const StateVector k1 = eval(x);
        const StateVector k2 = eval(x + 0.5 * h * k1);
        const StateVector k3 = eval(x + 0.5 * h * k2);
        const StateVector k4 = eval(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (clamp_floor && x(0) < kVxFloor) x(0) = kVxFloor;
    }
    VehicleState out = VehicleState::from_vector(x);
    if (clamp_floor && out.vx < kVxFloor) out.vx = kVxFloor;
    return out;
}

}  // namespace cavgame
