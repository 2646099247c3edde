#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cavgame/vehicle_dynamics.hpp"

namespace cavgame {

struct DrivingProfile {
    std::string name = "moderate";
    double omega_s = 0.5;
    double omega_c = 0.3;
    double omega_e = 0.2;

    static DrivingProfile aggressive();
    static DrivingProfile moderate();
    static DrivingProfile conservative();
    // Throws std::invalid_argument for unknown names.
    static DrivingProfile from_name(std::string_view name);

    bool same_weights(const DrivingProfile& o) const;
};

struct LateralReference {
    double y = 0.0;
    double phi = 0.0;
};

struct LaneModel {
    int lane_count = 3;
    double lane_width = 4.0;
    double lane1_center_y = 4.0;  // lanes are numbered left to right, lane 1 has the largest Y
    std::vector<double> v_max{30.0, 30.0, 30.0};
    int ramp_lane = 3;
    double merge_start_x = 0.0;
    double merge_end_x = 200.0;
    double change_duration = 4.0;  // s, nominal time for the lateral transition of a lane change

    bool has_lane(int lane) const { return lane >= 1 && lane <= lane_count; }
    double center_y(int lane) const;
    double speed_limit(int lane) const;
    int nearest_lane(double y) const;
    // Lateral reference while moving from `from` to `to`, `elapsed` seconds after the commit.
    LateralReference change_reference(int from, int to, double elapsed, double vx) const;
    void validate() const;
};

struct CostWeights {
    double varpi_v_log = 0.2;
    double varpi_s_log = 50.0;
    double varpi_v_lat = 0.2;
    double varpi_s_lat = 50.0;
    double varpi_y_lk = 1.0;
    double varpi_phi_lk = 5.0;
    double varpi_jx = 0.5;
    double varpi_jy = 0.5;
    double varpi_e = 1.0;
    double epsilon = 1e-3;
    double L_V = 5.0;
    // Merge urgency for a vehicle still on the on-ramp: varpi_ramp * progress^2,
    // progress measured from urgency_start_x to the end of the merging zone.
    double varpi_ramp = 4.0;
    double urgency_start_x = 0.0;

    void validate() const;
};

struct PotentialFieldParams {
    double hbar = 1.0;
    double sigma_x = 10.0;
    double sigma_y = 2.0;
    double varrho = 1.0;
    double varsigma = 0.05;

    void validate() const;
};

// Fixed reference ranges; raw sub-costs are divided by these before weighting.
struct Normalization {
    double safety = 20.0;
    double comfort = 4.0;
    double efficiency = 64.0;

    void validate() const;
};

struct ConstraintLimits {
    double min_gap = 2.0;                  // m
    double dy_max = 0.2;                   // m
    double dphi_max = 2.0 * M_PI / 180.0;  // rad
    double ax_max = 4.0;
    double ay_max = 4.0;
    double jx_max = 2.0;
    double jy_max = 2.0;
    double vx_max = 30.0;
    double r_min = 8.0;
    double delta_max = 30.0 * M_PI / 180.0;
    double ddelta_max = 0.3 * M_PI / 180.0;
    double dax_max = 0.1;

    void validate() const;
};

// Pose and speed of a vehicle as seen by the cost terms.
struct AgentPose {
    double X = 0.0;
    double Y = 0.0;
    double v = 0.0;
    double phi = 0.0;
};

double switch_eta(double dv);

double gap_between(const AgentPose& a, const AgentPose& b, double L_V);

double longitudinal_safety_cost(const AgentPose& host, const std::optional<AgentPose>& lead, const CostWeights& w);

// Throws MissingNeighbor when the target lane host_lane + beta does not exist.
double lateral_safety_cost(const AgentPose& host, const std::optional<AgentPose>& neighbor, int host_lane, int beta,
                           const LaneModel& lanes, const CostWeights& w);

double lane_keeping_cost(double dy, double dphi, const CostWeights& w);

double potential_field_value(double X, double Y, const AgentPose& source, const PotentialFieldParams& pf);

double lane_change_safety_cost(double X, double Y, const std::optional<AgentPose>& lead,
                               const std::optional<AgentPose>& neighbor, const PotentialFieldParams& pf);

double safety_cost(int beta, double J_log, double J_lat, double J_lk, double J_lc);

double comfort_cost(double jx, double jy, const CostWeights& w);

double efficiency_cost(double vx, std::optional<double> v_lv, double v_max_lane, const CostWeights& w);

double merge_urgency_cost(double X, const LaneModel& lanes, const CostWeights& w);

struct CostBreakdown {
    double J_s = 0.0;
    double J_c = 0.0;
    double J_e = 0.0;
    double J_total = 0.0;
    // raw sub-terms
    double log = 0.0;
    double lat = 0.0;
    double lk = 0.0;
    double lc = 0.0;
    double urgency = 0.0;

    std::map<std::string, double> components() const;
};

// Inputs are already normalized.
CostBreakdown total_cost(const DrivingProfile& profile, double J_s, double J_c, double J_e);

// Everything one vehicle's cost needs at one instant.
struct StepCostInput {
    AgentPose host;
    std::optional<AgentPose> lead;      // nearest vehicle ahead in an occupied lane
    std::optional<AgentPose> neighbor;  // target-lane vehicle during a lane-change decision
    std::optional<double> reference_lead_speed;  // governs the desired speed
    int beta = 0;
    double lane_offset = 0.0;    // Y minus reference lane centre
    double heading_error = 0.0;  // rad
    double jerk_x = 0.0;
    double jerk_y = 0.0;
    double speed_limit = 30.0;
    double urgency = 0.0;  // merge_urgency_cost for vehicles still on the ramp, else 0
};

struct CostConfig {
    CostWeights weights;
    PotentialFieldParams potential_field;
    Normalization normalization;
};

CostBreakdown evaluate_step_cost(const StepCostInput& in, const DrivingProfile& profile, const CostConfig& cfg);

enum class ConstraintId {
    Gap,
    LaneOffset,
    Heading,
    JerkX,
    JerkY,
    AccelX,
    AccelY,
    Speed,
    Curvature,
    Steering,
    SteeringIncrement,
    AccelIncrement,
};

std::string_view constraint_name(ConstraintId id);

// Gap, speed, lateral acceleration and curvature excesses shrink when the vehicle slows down;
// tracking, jerk and steering excesses do not.
bool relieved_by_braking(ConstraintId id);

struct Violation {
    ConstraintId id;
    int step;
    double magnitude;
};

struct ConstraintReport {
    std::vector<Violation> violations;
    bool feasible() const { return violations.empty(); }
    double total_magnitude() const;
};

// A predicted or realized trajectory segment for one vehicle.
struct TrajectoryCheck {
    std::span<const VehicleState> states;    // x(0) .. x(N)
    std::span<const ControlInput> controls;  // u(0) .. u(N-1)
    ControlInput previous_control;           // u(-1)
    std::optional<double> previous_lateral_accel;
    double dt = 0.1;
    double reference_center_y = 0.0;
    double speed_limit = 30.0;
    bool lane_keeping = true;      // tracking-error bounds active
    std::span<const double> gaps;  // gap to the relevant vehicles at x(1)..x(N); empty if none
};

// Throws TooShort for fewer than three states.
ConstraintReport check_constraints(const TrajectoryCheck& t, const ConstraintLimits& limits);

// Sum of violation magnitudes without building the report.
double constraint_violation(const TrajectoryCheck& t, const ConstraintLimits& limits);

struct ViolationSplit {
    double total = 0.0;
    double braking = 0.0;  // part relieved by braking
};
ViolationSplit split_violation(const TrajectoryCheck& t, const ConstraintLimits& limits);

// Finite-difference curvature at the middle of three consecutive points.
double discrete_curvature(double x0, double y0, double x1, double y1, double x2, double y2);

double lateral_acceleration(const VehicleState& now, const VehicleState& next, double dt);

}  // namespace cavgame
