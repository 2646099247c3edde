#pragma once

namespace cavgame {

struct DecisionAction {
    double da_x = 0.0;      // acceleration increment, m/s^2
    double ddelta_f = 0.0;  // steering increment, rad
    int beta = 0;           // 0 keep lane, -1 change left

    bool operator==(const DecisionAction&) const = default;
};

inline constexpr DecisionAction kHoldAction{};

}  // namespace cavgame
