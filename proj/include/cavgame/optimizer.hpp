#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavgame/coalition_engine.hpp"
#include "cavgame/decision_action.hpp"
#include "cavgame/decision_costs.hpp"
#include "cavgame/motion_prediction.hpp"
#include "cavgame/vehicle_dynamics.hpp"

namespace cavgame {

struct CharacteristicParams {
    double Q = 1.0;
    std::array<double, 3> R{1.0, 1.0, 0.0};  // diagonal over (da_x, ddelta_f, beta)
};

double characteristic_value(std::span<const double> costs, std::span<const DecisionAction> actions,
                            const CharacteristicParams& cp);

// One entry per player holding lane-change authority: its current lane.
// Returns every assignment over {-1, 0}, dropping those whose target lane is missing.
std::vector<std::vector<int>> enumerate_beta(std::span<const int> lanes, const LaneModel& lane_model);

struct SolverConfig {
    int population = 32;
    int iterations = 60;
    double mutation = 0.7;
    double crossover = 0.9;
    double penalty = 1e4;
    int polish_rounds = 14;  // coordinate pattern-search refinements after the population search
    int threads = 1;

    void validate() const;
};

struct PlannerConfig {
    Horizon horizon;
    double dt = 0.1;
    VehicleParams vehicle;
    LaneModel lanes;
    CostConfig costs;
    ConstraintLimits limits;
    CharacteristicParams characteristic;
    SolverConfig solver;
};

struct AgentSnapshot {
    VehicleId id;
    VehicleState state;
    ControlInput last_control;
    int lane = 1;                     // reference lane; the target lane while changing
    std::optional<int> origin_lane;   // set while a lane change is in progress
    DrivingProfile profile;
    bool player = true;
    std::optional<double> last_lateral_accel;
    std::vector<DecisionAction> history;  // applied actions, oldest first
    bool lane_change_used = false;        // one lane change per vehicle
    double change_elapsed = 0.0;          // s since the lane change in progress was committed

    bool changing() const { return origin_lane.has_value(); }
    bool may_change_lane() const { return !changing() && !lane_change_used; }
};

// Linear prediction data for one player, frozen for the current decision step.
struct PlayerModel {
    AugmentedState theta;
    std::shared_ptr<const PredictionOperator> op;
    StateVector drift;
    Eigen::VectorXd free;  // response to zero increments, 6*Np
};

PlayerModel build_player_model(const AgentSnapshot& a, const PlannerConfig& cfg);

struct WorldSnapshot {
    int step = 0;
    std::vector<AgentSnapshot> agents;
    std::vector<std::optional<PlayerModel>> models;  // parallel to agents; players only
};

WorldSnapshot make_snapshot(int step, std::vector<AgentSnapshot> agents, const PlannerConfig& cfg);

struct CoalitionMember {
    int agent = 0;
    int leader = -1;  // agent index of the sub-coalition leader; -1 for decision makers
    int delay = 0;    // steps behind the leader
};

struct CoalitionProblem {
    std::vector<CoalitionMember> members;  // decision makers first, in the order of their variables
    SubsetMask mask = 0;                   // identifies the subset for seeding

    std::vector<int> decision_makers() const;
};

struct SolveResult {
    std::vector<int> agents;                                // member agent indices
    std::vector<std::vector<DecisionAction>> sequences;     // Nc actions per member
    std::vector<double> lambda;                             // per member
    std::vector<double> violation;                          // per member
    std::vector<double> braking_violation;                  // per member, part relieved by braking
    std::vector<int> beta;                                  // per decision maker
    std::vector<double> variables;                          // best continuous vector
    double total = 0.0;                                     // sum of lambda
    double objective = 0.0;                                 // total plus penalty times violation
    bool feasible = false;
    long evaluations = 0;
};

// Detailed evaluation of one plan for inspection and tests.
struct MemberEvaluation {
    std::vector<VehicleState> states;  // x(0)..x(Np)
    std::vector<ControlInput> controls;
    std::vector<CostBreakdown> costs;  // at x(1)..x(Np)
    std::vector<DecisionAction> actions;
    double lambda = 0.0;
    double violation = 0.0;
    double braking_violation = 0.0;
};

std::vector<MemberEvaluation> evaluate_plan(const WorldSnapshot& world, const CoalitionProblem& problem,
                                            const PlannerConfig& cfg, std::span<const int> beta,
                                            std::span<const double> variables);

// Warm starts are full continuous vectors for this problem's decision makers.
SolveResult solve_coalition(const WorldSnapshot& world, const CoalitionProblem& problem, const PlannerConfig& cfg,
                            std::uint64_t seed, std::span<const std::vector<double>> warm_starts = {});

// First action of every member. Throws Infeasible for an infeasible result.
std::vector<DecisionAction> receding_horizon_apply(const SolveResult& result);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace cavgame
