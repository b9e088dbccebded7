#pragma once

#include <Eigen/Dense>

#include <optional>

#include "fosep/dynamics.hpp"
#include "fosep/fbs.hpp"

namespace fosep {

/// One feed drive: a servo model plus an optional pre-compensator.
///
/// Signals are deviations from the axis start position, so a trajectory that
/// rests at its start produces no transient. Without a compensator the
/// command is passed through unchanged (C = I).
class AxisServo {
 public:
  explicit AxisServo(DiscreteTransferFunction model, std::optional<Compensator> compensator = std::nullopt)
      : model_(std::move(model)), compensator_(std::move(compensator)) {}

  const DiscreteTransferFunction& model() const noexcept { return model_; }
  const std::optional<Compensator>& compensator() const noexcept { return compensator_; }
  bool compensated() const noexcept { return compensator_.has_value(); }

  /// Modified command C v.
  Eigen::VectorXd command(const Eigen::VectorXd& v) const {
    return compensator_ ? compensator_->compensate(v) : v;
  }

  /// Predicted output G C v.
  Eigen::VectorXd response(const Eigen::VectorXd& v) const { return simulate(model_, command(v)); }

  /// Predicted tracking error (I - G C) v.
  Eigen::VectorXd tracking_error(const Eigen::VectorXd& v) const { return v - response(v); }

  /// Column-wise (I - G C) V.
  Eigen::MatrixXd tracking_error(const Eigen::MatrixXd& V) const {
    const Eigen::MatrixXd commanded = compensator_ ? compensator_->compensate(V) : V;
    Eigen::MatrixXd out(V.rows(), V.cols());
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
      out.col(j) = V.col(j) - simulate(model_, Eigen::VectorXd(commanded.col(j)));
    }
    return out;
  }

 private:
  DiscreteTransferFunction model_;
  std::optional<Compensator> compensator_;
};

struct ServoPair {
  AxisServo x;
  AxisServo y;
};

}  // namespace fosep
