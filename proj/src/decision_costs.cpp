#include "cavgame/decision_costs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cavgame/errors.hpp"

namespace cavgame {

DrivingProfile DrivingProfile::aggressive() { return {"aggressive", 0.1, 0.1, 0.8}; }
DrivingProfile DrivingProfile::moderate() { return {"moderate", 0.5, 0.3, 0.2}; }
DrivingProfile DrivingProfile::conservative() { return {"conservative", 0.7, 0.2, 0.1}; }

DrivingProfile DrivingProfile::from_name(std::string_view name) {
    if (name == "aggressive") return aggressive();
    if (name == "moderate") return moderate();
    if (name == "conservative") return conservative();
    throw std::invalid_argument("unknown driving profile '" + std::string(name) + "'");
}

bool DrivingProfile::same_weights(const DrivingProfile& o) const {
    return omega_s == o.omega_s && omega_c == o.omega_c && omega_e == o.omega_e;
}

double LaneModel::center_y(int lane) const {
    if (!has_lane(lane)) throw std::out_of_range("lane " + std::to_string(lane) + " does not exist");
    return lane1_center_y - (lane - 1) * lane_width;
}

double LaneModel::speed_limit(int lane) const {
    if (!has_lane(lane)) throw std::out_of_range("lane " + std::to_string(lane) + " does not exist");
    return v_max[static_cast<size_t>(lane - 1)];
}

int LaneModel::nearest_lane(double y) const {
    const int lane = static_cast<int>(std::lround((lane1_center_y - y) / lane_width)) + 1;
    return std::clamp(lane, 1, lane_count);
}

LateralReference LaneModel::change_reference(int from, int to, double elapsed, double vx) const {
    const double y0 = center_y(from);
    const double y1 = center_y(to);
    const double s = std::clamp(elapsed / change_duration, 0.0, 1.0);
    // quintic blend: zero lateral speed and acceleration at both ends
    const double shape = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
    const double slope = 30.0 * s * s * (1.0 - s) * (1.0 - s) / change_duration;
    return {y0 + (y1 - y0) * shape, std::atan2((y1 - y0) * slope, std::max(vx, kVxFloor))};
}

void LaneModel::validate() const {
    if (lane_count < 1) throw std::invalid_argument("lane_count must be positive");
    if (!(lane_width > 0)) throw std::invalid_argument("lane_width must be positive");
    if (static_cast<int>(v_max.size()) != lane_count) throw std::invalid_argument("v_max needs one entry per lane");
    for (double v : v_max) {
        if (!(v > 0)) throw std::invalid_argument("speed limits must be positive");
    }
    if (!has_lane(ramp_lane)) throw std::invalid_argument("ramp_lane does not exist");
    if (!(merge_end_x > merge_start_x)) throw std::invalid_argument("merge zone must have positive length");
    if (!(change_duration > 0)) throw std::invalid_argument("change_duration must be positive");
}

void CostWeights::validate() const {
    for (double v : {varpi_v_log, varpi_s_log, varpi_v_lat, varpi_s_lat, varpi_y_lk, varpi_phi_lk, varpi_jx, varpi_jy,
                     varpi_e, L_V, varpi_ramp}) {
        if (!(v >= 0)) throw std::invalid_argument("cost weights must be nonnegative");
    }
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
}

void PotentialFieldParams::validate() const {
    if (!(sigma_x > 0 && sigma_y > 0)) throw std::invalid_argument("potential field sigmas must be positive");
    if (!(varrho > 0)) throw std::invalid_argument("potential field exponent must be positive");
}

void Normalization::validate() const {
    if (!(safety > 0 && comfort > 0 && efficiency > 0)) {
        throw std::invalid_argument("normalization ranges must be positive");
    }
}

void ConstraintLimits::validate() const {
    for (double v : {min_gap, dy_max, dphi_max, ax_max, ay_max, jx_max, jy_max, vx_max, r_min, delta_max, ddelta_max,
                     dax_max}) {
        if (!(v >= 0)) throw std::invalid_argument("constraint limits must be nonnegative");
    }
    if (!(r_min > 0)) throw std::invalid_argument("r_min must be positive");
}

double switch_eta(double dv) {
    const double sgn = (dv > 0) - (dv < 0);
    return 0.5 - 0.5 * sgn;
}

double gap_between(const AgentPose& a, const AgentPose& b, double L_V) {
    return std::hypot(a.X - b.X, a.Y - b.Y) - L_V;
}

namespace {

double pair_cost(double dv, double ds, double wv, double ws, double eps) {
    return wv * switch_eta(dv) * dv * dv + ws / (ds * ds + eps);
}

}  // namespace

double longitudinal_safety_cost(const AgentPose& host, const std::optional<AgentPose>& lead, const CostWeights& w) {
    if (!lead) return 0.0;
    const double dv = lead->v - host.v;
    return pair_cost(dv, gap_between(*lead, host, w.L_V), w.varpi_v_log, w.varpi_s_log, w.epsilon);
}

double lateral_safety_cost(const AgentPose& host, const std::optional<AgentPose>& neighbor, int host_lane, int beta,
                           const LaneModel& lanes, const CostWeights& w) {
    if (!lanes.has_lane(host_lane + beta)) {
        throw MissingNeighbor("target lane " + std::to_string(host_lane + beta) + " does not exist");
    }
    if (!neighbor) return 0.0;
    const double dv = host.v - neighbor->v;
    return pair_cost(dv, gap_between(*neighbor, host, w.L_V), w.varpi_v_lat, w.varpi_s_lat, w.epsilon);
}

double lane_keeping_cost(double dy, double dphi, const CostWeights& w) {
    return w.varpi_y_lk * dy * dy + w.varpi_phi_lk * dphi * dphi;
}

double potential_field_value(double X, double Y, const AgentPose& source, const PotentialFieldParams& pf) {
    const double c = std::cos(source.phi);
    const double s = std::sin(source.phi);
    const double dx = X - source.X;
    const double dy = Y - source.Y;
    const double xh = c * dx + s * dy;
    const double yh = -s * dx + c * dy;
    const double qx = xh * xh / (2.0 * pf.sigma_x * pf.sigma_x);
    const double qy = yh * yh / (2.0 * pf.sigma_y * pf.sigma_y);
    const double q = qx + qy;
    double upsilon = 0.0;
    if (q > 0.0) {
        const double k = xh < 0.0 ? -1.0 : 1.0;
        upsilon = k * qx / std::sqrt(q);
    }
    const double psi = -std::pow(q, pf.varrho) + pf.varsigma * source.v * upsilon;
    return pf.hbar * std::exp(psi);
}

double lane_change_safety_cost(double X, double Y, const std::optional<AgentPose>& lead,
                               const std::optional<AgentPose>& neighbor, const PotentialFieldParams& pf) {
    double total = 0.0;
    if (lead) total += potential_field_value(X, Y, *lead, pf);
    if (neighbor) total += potential_field_value(X, Y, *neighbor, pf);
    return total;
}

double safety_cost(int beta, double J_log, double J_lat, double J_lk, double J_lc) {
    const double b2 = static_cast<double>(beta * beta);
    const double keep = (b2 - 1.0) * (b2 - 1.0);
    return keep * J_log + b2 * J_lat + keep * J_lk + J_lc;
}

double comfort_cost(double jx, double jy, const CostWeights& w) { return w.varpi_jx * jx * jx + w.varpi_jy * jy * jy; }

double efficiency_cost(double vx, std::optional<double> v_lv, double v_max_lane, const CostWeights& w) {
    const double v_hat = v_lv ? std::min(v_max_lane, *v_lv) : v_max_lane;
    const double d = vx - v_hat;
    return w.varpi_e * d * d;
}

double merge_urgency_cost(double X, const LaneModel& lanes, const CostWeights& w) {
    const double span = lanes.merge_end_x - w.urgency_start_x;
    if (!(span > 0)) return 0.0;
    const double rho = std::max(0.0, (X - w.urgency_start_x) / span);
    return w.varpi_ramp * rho * rho;
}

std::map<std::string, double> CostBreakdown::components() const {
    return {{"comfort", J_c},    {"efficiency", J_e}, {"lane_change", lc}, {"lane_keeping", lk},
            {"lateral", lat},    {"longitudinal", log}, {"safety", J_s},   {"urgency", urgency}};
}

CostBreakdown total_cost(const DrivingProfile& profile, double J_s, double J_c, double J_e) {
    CostBreakdown b;
    b.J_s = J_s;
    b.J_c = J_c;
    b.J_e = J_e;
    b.J_total = profile.omega_s * J_s + profile.omega_c * J_c + profile.omega_e * J_e;
    return b;
}

CostBreakdown evaluate_step_cost(const StepCostInput& in, const DrivingProfile& profile, const CostConfig& cfg) {
    const CostWeights& w = cfg.weights;
    const double j_log = in.beta == 0 ? longitudinal_safety_cost(in.host, in.lead, w) : 0.0;
    double j_lat = 0.0;
    if (in.beta != 0 && in.neighbor) {
        const double dv = in.host.v - in.neighbor->v;
        j_lat = pair_cost(dv, gap_between(*in.neighbor, in.host, w.L_V), w.varpi_v_lat, w.varpi_s_lat, w.epsilon);
    }
    const double j_lk = lane_keeping_cost(in.lane_offset, in.heading_error, w);
    const double j_lc = lane_change_safety_cost(in.host.X, in.host.Y, in.lead, in.neighbor, cfg.potential_field);
    const double urgency = in.urgency;
    const double js_raw = safety_cost(in.beta, j_log, j_lat, j_lk, j_lc) + urgency;
    const double jc_raw = comfort_cost(in.jerk_x, in.jerk_y, w);
    const double je_raw = efficiency_cost(in.host.v, in.reference_lead_speed, in.speed_limit, w);

    const Normalization& n = cfg.normalization;
    CostBreakdown b = total_cost(profile, js_raw / n.safety, jc_raw / n.comfort, je_raw / n.efficiency);
    b.log = j_log;
    b.lat = j_lat;
    b.lk = j_lk;
    b.lc = j_lc;
    b.urgency = urgency;
    return b;
}

std::string_view constraint_name(ConstraintId id) {
    switch (id) {
        case ConstraintId::Gap: return "gap";
        case ConstraintId::LaneOffset: return "lane_offset";
        case ConstraintId::Heading: return "heading";
        case ConstraintId::JerkX: return "jerk_x";
        case ConstraintId::JerkY: return "jerk_y";
        case ConstraintId::AccelX: return "accel_x";
        case ConstraintId::AccelY: return "accel_y";
        case ConstraintId::Speed: return "speed";
        case ConstraintId::Curvature: return "curvature";
        case ConstraintId::Steering: return "steering";
        case ConstraintId::SteeringIncrement: return "steering_increment";
        case ConstraintId::AccelIncrement: return "accel_increment";
    }
    return "unknown";
}

double ConstraintReport::total_magnitude() const {
    double s = 0.0;
    for (const auto& v : violations) s += v.magnitude;
    return s;
}

double discrete_curvature(double x0, double y0, double x1, double y1, double x2, double y2) {
    // dt cancels between numerator and denominator
    const double xd = x1 - x0;
    const double yd = y1 - y0;
    const double xdd = x2 - 2.0 * x1 + x0;
    const double ydd = y2 - 2.0 * y1 + y0;
    const double speed2 = xd * xd + yd * yd;
    if (speed2 <= 0.0) return 0.0;
    return std::abs(xd * ydd - xdd * yd) / std::pow(speed2, 1.5);
}

double lateral_acceleration(const VehicleState& now, const VehicleState& next, double dt) {
    return (next.vy - now.vy) / dt + now.vx * now.r;
}

namespace {

constexpr double kBoundTol = 1e-9;

template <class Sink>
void visit_violations(const TrajectoryCheck& t, const ConstraintLimits& lim, Sink&& sink) {
    const size_t n = t.states.size();
    if (n < 3) throw TooShort("trajectory needs at least 3 states, got " + std::to_string(n));
    if (t.controls.size() + 1 < n) throw DimensionMismatch("need one control per transition");

    auto bound = [&](ConstraintId id, int step, double value, double limit) {
        const double excess = std::abs(value) - limit;
        if (excess > kBoundTol) sink(id, step, excess);
    };

    for (size_t k = 1; k < n; ++k) {
        const VehicleState& s = t.states[k];
        const int step = static_cast<int>(k);
        bound(ConstraintId::Speed, step, s.vx, t.speed_limit);
        if (t.lane_keeping) {
            bound(ConstraintId::LaneOffset, step, s.Y - t.reference_center_y, lim.dy_max);
            bound(ConstraintId::Heading, step, s.phi, lim.dphi_max);
        }
        if (!t.gaps.empty()) {
            const double g = t.gaps[k - 1];
            if (lim.min_gap - g > kBoundTol) sink(ConstraintId::Gap, step, lim.min_gap - g);
        }
    }

    double prev_ax = t.previous_control.ax;
    double prev_delta = t.previous_control.delta_f;
    std::optional<double> prev_ay = t.previous_lateral_accel;
    for (size_t k = 0; k + 1 < n; ++k) {
        const ControlInput& u = t.controls[k];
        const int step = static_cast<int>(k);
        bound(ConstraintId::AccelX, step, u.ax, lim.ax_max);
        bound(ConstraintId::Steering, step, u.delta_f, lim.delta_max);
        bound(ConstraintId::AccelIncrement, step, u.ax - prev_ax, lim.dax_max);
        bound(ConstraintId::SteeringIncrement, step, u.delta_f - prev_delta, lim.ddelta_max);
        bound(ConstraintId::JerkX, step, (u.ax - prev_ax) / t.dt, lim.jx_max);
        const double ay = lateral_acceleration(t.states[k], t.states[k + 1], t.dt);
        bound(ConstraintId::AccelY, step, ay, lim.ay_max);
        if (prev_ay) bound(ConstraintId::JerkY, step, (ay - *prev_ay) / t.dt, lim.jy_max);
        prev_ax = u.ax;
        prev_delta = u.delta_f;
        prev_ay = ay;
    }

    const double kappa_max = 1.0 / lim.r_min;
    for (size_t k = 0; k + 2 < n; ++k) {
        const auto& a = t.states[k];
        const auto& b = t.states[k + 1];
        const auto& c = t.states[k + 2];
        const double kappa = discrete_curvature(a.X, a.Y, b.X, b.Y, c.X, c.Y);
        if (kappa - kappa_max > kBoundTol) sink(ConstraintId::Curvature, static_cast<int>(k), kappa - kappa_max);
    }
}

}  // namespace

bool relieved_by_braking(ConstraintId id) {
    switch (id) {
        case ConstraintId::Gap:
        case ConstraintId::Speed:
        case ConstraintId::AccelY:
        case ConstraintId::Curvature:
            return true;
        default:
            return false;
    }
}

ConstraintReport check_constraints(const TrajectoryCheck& t, const ConstraintLimits& limits) {
    ConstraintReport r;
    visit_violations(t, limits, [&](ConstraintId id, int step, double mag) { r.violations.push_back({id, step, mag}); });
    return r;
}

double constraint_violation(const TrajectoryCheck& t, const ConstraintLimits& limits) {
    double total = 0.0;
    visit_violations(t, limits, [&](ConstraintId, int, double mag) { total += mag; });
    return total;
}

ViolationSplit split_violation(const TrajectoryCheck& t, const ConstraintLimits& limits) {
    ViolationSplit out;
    visit_violations(t, limits, [&](ConstraintId id, int, double mag) {
        out.total += mag;
        if (relieved_by_braking(id)) out.braking += mag;
    });
    return out;
}

}  // namespace cavgame
