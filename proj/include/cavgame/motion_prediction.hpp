#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cavgame/vehicle_dynamics.hpp"

namespace cavgame {

using AugmentedVector = Eigen::Matrix<double, 8, 1>;
using AugmentedMatrix = Eigen::Matrix<double, 8, 8>;

struct AugmentedState {
    AugmentedVector theta = AugmentedVector::Zero();
};

AugmentedState augment(const VehicleState& x, const ControlInput& prev_u);
std::pair<VehicleState, ControlInput> split(const AugmentedState& a);

struct AugmentedModel {
    AugmentedMatrix A;                  // [[Ad, Bd], [0, I2]]
    Eigen::Matrix<double, 8, 2> B;      // [[Bd], [I2]]
    Eigen::Matrix<double, 6, 8> C;      // [I6, 0]
};

AugmentedModel build_augmented(const StateMatrix& Ad, const InputMatrix& Bd);

struct Horizon {
    int np = 5;
    int nc = 2;
    void validate() const;
};

class PredictionOperator {
public:
    PredictionOperator(const AugmentedModel& model, Horizon h);

    const Eigen::MatrixXd& cbar() const { return cbar_; }
    const Eigen::MatrixXd& dbar() const { return dbar_; }
    // Maps a constant state-space drift (per step) to its accumulated effect on the outputs.
    const Eigen::MatrixXd& ebar() const { return ebar_; }
    const Horizon& horizon() const { return h_; }

    // Outputs x(k+1..k+Np) for increments du(k..k+Nc-1); later increments are zero.
    std::vector<StateVector> predict(const AugmentedState& theta, std::span<const InputVector> du_seq) const;

    // Same as predict with a per-step affine drift term added to the state update.
    std::vector<StateVector> predict(const AugmentedState& theta, std::span<const InputVector> du_seq,
                                     const StateVector& drift) const;

    // Stacked forms, length 6*Np.
    Eigen::VectorXd free_response(const AugmentedState& theta, const StateVector& drift) const;
    Eigen::VectorXd stacked(const AugmentedState& theta, const Eigen::VectorXd& du_flat) const;

private:
    Horizon h_;
    Eigen::MatrixXd cbar_;
    Eigen::MatrixXd dbar_;
    Eigen::MatrixXd ebar_;
};

PredictionOperator build_prediction_operator(const AugmentedModel& model, Horizon h);

}  // namespace cavgame
