#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cavgame/coalition_engine.hpp"
#include "cavgame/decision_costs.hpp"
#include "cavgame/scenario.hpp"

namespace cavgame {

struct TraceRow {
    int step = 0;
    double t = 0.0;
    VehicleId vehicle_id;
    VehicleState state;   // at t, before the action
    ControlInput control; // applied over [t, t+dt)
    int beta = 0;
    int lane = 0;          // reference lane after the action
    int coalition_id = -1; // -1 for lead vehicles
    CostBreakdown cost;
    double lambda = 0.0;   // Q*J^2 + effort of the applied action
};

struct Trace {
    std::vector<TraceRow> rows;
};

struct SubCoalitionRecord {
    std::vector<VehicleId> members;
    double standalone = 0.0;
    double allocation = 0.0;
    bool defected = false;
};

struct StepRecord {
    int step = 0;
    double t = 0.0;
    std::string partition;
    CoalitionType type = CoalitionType::SinglePlayer;
    std::vector<SubCoalitionRecord> sub_coalitions;
    std::optional<double> grand_value;
    double solve_seconds = 0.0;
    long evaluations = 0;
    std::vector<VehicleId> fallbacks;
};

struct LaneChangeRecord {
    VehicleId vehicle_id;
    int from = 0;
    int to = 0;
    double start_t = 0.0;
    std::optional<double> end_t;
};

struct VehicleSummary {
    VehicleId id;
    bool player = true;
    std::string profile;
    double rms_cost = 0.0;    // RMS of J_total over all steps
    double rms_lambda = 0.0;  // RMS of the per-step characteristic contribution
    double rms_safety = 0.0;
    double rms_comfort = 0.0;
    double rms_efficiency = 0.0;
    double min_gap = 0.0;
    double final_vx = 0.0;
    int final_lane = 0;
    int fallbacks = 0;
};

struct SolverStats {
    double mean_step_seconds = 0.0;
    double max_step_seconds = 0.0;
    double total_seconds = 0.0;
    double mean_evaluations = 0.0;
};

struct AbortInfo {
    int step = 0;
    double t = 0.0;
    VehicleId first;
    VehicleId second;
    double gap = 0.0;
};

struct RunSummary {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string formation;
    int steps = 0;
    bool completed = true;
    std::optional<AbortInfo> abort;
    std::vector<VehicleSummary> vehicles;
    std::vector<LaneChangeRecord> lane_changes;
    std::vector<StepRecord> timeline;
    SolverStats solver;
    Scenario config;
};

struct RunResult {
    Trace trace;
    RunSummary summary;
    bool aborted() const { return summary.abort.has_value(); }
};

// Collision gap between two vehicles: positive when separated.
double body_gap(const VehicleState& a, const VehicleState& b, const VehicleParams& p);

RunResult run_closed_loop(const Scenario& s);

// Rebuilds per-vehicle statistics and the coalition timeline from trace rows.
RunSummary summarize_trace(const Trace& trace, const Scenario* config);

}  // namespace cavgame
