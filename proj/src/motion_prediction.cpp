#include "cavgame/motion_prediction.hpp"

#include <stdexcept>
#include <string>

#include "cavgame/errors.hpp"

namespace cavgame {

AugmentedState augment(const VehicleState& x, const ControlInput& prev_u) {
    AugmentedState a;
    a.theta << x.vector(), prev_u.vector();
    return a;
}

std::pair<VehicleState, ControlInput> split(const AugmentedState& a) {
    return {VehicleState::from_vector(a.theta.head<6>()), ControlInput::from_vector(a.theta.tail<2>())};
}

AugmentedModel build_augmented(const StateMatrix& Ad, const InputMatrix& Bd) {
    AugmentedModel m;
    m.A.setZero();
    m.A.topLeftCorner<6, 6>() = Ad;
    m.A.topRightCorner<6, 2>() = Bd;
    m.A.bottomRightCorner<2, 2>().setIdentity();
    m.B.topRows<6>() = Bd;
    m.B.bottomRows<2>().setIdentity();
    m.C.setZero();
    m.C.leftCols<6>().setIdentity();
    return m;
}

void Horizon::validate() const {
    if (nc < 1 || np <= nc) {
        throw std::invalid_argument("horizon requires np > nc >= 1 (np=" + std::to_string(np) +
                                    ", nc=" + std::to_string(nc) + ")");
    }
}

PredictionOperator::PredictionOperator(const AugmentedModel& model, Horizon h) : h_(h) {
    h_.validate();
    const int np = h_.np;
    const int nc = h_.nc;
    std::vector<AugmentedMatrix> powers(np + 1);
    powers[0].setIdentity();
    for (int i = 1; i <= np; ++i) powers[i] = model.A * powers[i - 1];

    cbar_ = Eigen::MatrixXd::Zero(6 * np, 8);
    dbar_ = Eigen::MatrixXd::Zero(6 * np, 2 * nc);
    ebar_ = Eigen::MatrixXd::Zero(6 * np, 6);

    Eigen::Matrix<double, 8, 6> G = Eigen::Matrix<double, 8, 6>::Zero();
    G.topRows<6>().setIdentity();
    Eigen::Matrix<double, 6, 6> acc = Eigen::Matrix<double, 6, 6>::Zero();

    for (int i = 1; i <= np; ++i) {
        cbar_.block(6 * (i - 1), 0, 6, 8) = model.C * powers[i];
        for (int j = 1; j <= std::min(i, nc); ++j) {
            dbar_.block(6 * (i - 1), 2 * (j - 1), 6, 2) = model.C * powers[i - j] * model.B;
        }
        acc += model.C * powers[i - 1] * G;
        ebar_.block(6 * (i - 1), 0, 6, 6) = acc;
    }
}

Eigen::VectorXd PredictionOperator::free_response(const AugmentedState& theta, const StateVector& drift) const {
    return cbar_ * theta.theta + ebar_ * drift;
}

Eigen::VectorXd PredictionOperator::stacked(const AugmentedState& theta, const Eigen::VectorXd& du_flat) const {
    if (du_flat.size() != 2 * h_.nc) {
        throw DimensionMismatch("expected " + std::to_string(2 * h_.nc) + " increments, got " +
                                std::to_string(du_flat.size()));
    }
    return cbar_ * theta.theta + dbar_ * du_flat;
}

std::vector<StateVector> PredictionOperator::predict(const AugmentedState& theta,
                                                     std::span<const InputVector> du_seq) const {
    return predict(theta, du_seq, StateVector::Zero());
}

std::vector<StateVector> PredictionOperator::predict(const AugmentedState& theta, std::span<const InputVector> du_seq,
                                                     const StateVector& drift) const {
    if (static_cast<int>(du_seq.size()) != h_.nc) {
        throw DimensionMismatch("expected " + std::to_string(h_.nc) + " increments, got " +
                                std::to_string(du_seq.size()));
    }
    Eigen::VectorXd du(2 * h_.nc);
    for (int j = 0; j < h_.nc; ++j) du.segment<2>(2 * j) = du_seq[j];
    const Eigen::VectorXd y = cbar_ * theta.theta + dbar_ * du + ebar_ * drift;
    std::vector<StateVector> out(h_.np);
    for (int i = 0; i < h_.np; ++i) out[i] = y.segment<6>(6 * i);
    return out;
}

PredictionOperator build_prediction_operator(const AugmentedModel& model, Horizon h) {
    return PredictionOperator(model, h);
}

}  // namespace cavgame
