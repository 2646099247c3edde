#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavgame/decision_action.hpp"
#include "cavgame/decision_costs.hpp"

namespace cavgame {

using VehicleId = std::string;
using SubsetMask = std::uint32_t;

enum class PlayerRole { Merger, MainLaneAdjacent, PassiveAdjacent, Lead };

struct Player {
    VehicleId id;
    int lane = 0;  // lane used for grouping
    DrivingProfile profile;
    PlayerRole role = PlayerRole::MainLaneAdjacent;
    double X = 0.0;
};

struct SubCoalition {
    std::vector<VehicleId> members;  // front to back
    int lane = 0;

    const VehicleId& leader() const { return members.front(); }
};

// Greedy per-lane chaining. Lanes are visited from the highest index (on-ramp)
// to lane 1; within a lane members are ordered front to back.
std::vector<SubCoalition> form_sub_coalitions(std::vector<Player> players, double gap_threshold);

class CharacteristicMap {
public:
    explicit CharacteristicMap(int n);

    int size() const { return n_; }
    SubsetMask grand() const { return (SubsetMask{1} << n_) - 1; }
    void set(SubsetMask s, double value);
    bool has(SubsetMask s) const;
    // Throws MissingSubset.
    double at(SubsetMask s) const;
    bool complete() const;

private:
    int n_;
    std::vector<std::optional<double>> values_;
};

// Exact Shapley value by enumerating all orderings. Throws MissingSubset.
std::vector<double> shapley_allocation(const CharacteristicMap& cmap);

enum class Rationality { Stay, BreakAway };

// Break away iff Q > J + tolerance.
Rationality rationality_check(double Q, double J, double tolerance = 0.0);

struct FormationOptions {
    // Absolute slack on the rationality and merge comparisons; zero gives the strict rule.
    double tolerance = 0.0;
};

struct FormationOutcome {
    std::vector<SubsetMask> coalitions;  // ordered by lowest member index
    std::vector<double> allocations;     // Shapley allocation in the grand coalition
    std::vector<bool> defected;
    CharacteristicMap values;
};

// Evaluates the coalitions needed by the formation rule; exceptions from the
// evaluator are rethrown as EvaluatorFailure naming the subset.
FormationOutcome coalition_formation(int n, const std::function<double(SubsetMask)>& evaluator,
                                     const FormationOptions& options = {});

enum class CoalitionType { SinglePlayer, MultiPlayer, Grand, GrandWithSub };

std::string_view coalition_type_name(CoalitionType t);

struct CoalitionPartition {
    std::vector<std::vector<SubCoalition>> coalitions;
    CoalitionType type = CoalitionType::SinglePlayer;

    // e.g. "{{V1,V4},{V2}} {{V3,V5}}"
    std::string to_string() const;
};

CoalitionPartition make_partition(const std::vector<SubCoalition>& subs, const std::vector<SubsetMask>& coalitions);

int delay_steps(double gap, double v_follower, double dt);

std::vector<DecisionAction> replay_with_delay(std::span<const DecisionAction> leader_decisions, double gap,
                                              double v_follower, double dt);

}  // namespace cavgame
