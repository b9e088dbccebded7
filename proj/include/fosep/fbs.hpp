#pragma once

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <string>

#include "fosep/dynamics.hpp"
#include "fosep/errors.hpp"
#include "fosep/splines.hpp"

namespace fosep {

/// Filtered B-spline servo error pre-compensator on a fixed horizon.
///
/// The modified command is parametrized as x_dm = N p. Filtering every basis
/// column through the model gives Ntilde = G N, and the control points are the
/// least-squares fit p* = argmin |x_d - Ntilde p|, so C = N Ntilde^+. The
/// least-squares problem is solved with a column-pivoted QR factorization.
class Compensator {
 public:
  static constexpr double kMaxCondition = 1e12;
  static constexpr int kDefaultOperatorCap = 20000;

  static Compensator build(const DiscreteTransferFunction& model, int rows, int control_points, int degree,
                           KnotStyle style = KnotStyle::kClamped) {
    if (degree < 1) throw ArgumentError("fbs: degree must be >= 1");
    if (control_points < degree + 1) throw ArgumentError("fbs: need at least degree + 1 control points");
    if (rows < control_points) throw RankDeficiencyError("fbs: fewer samples than control points");
    Compensator c;
    c.knots_ = std::make_shared<KnotVector>(KnotVector::make(style, control_points, degree));
    c.basis_ = basis_matrix(*c.knots_, rows);
    c.filtered_.resize(rows, control_points);
    for (int j = 0; j < control_points; ++j) c.filtered_.col(j) = simulate(model, Eigen::VectorXd(c.basis_.col(j)));
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(c.filtered_);
    const auto& sv = svd.singularValues();
    c.condition_ = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(c.condition_ <= kMaxCondition)) {
      throw RankDeficiencyError("fbs: filtered basis is rank deficient (condition " + std::to_string(c.condition_) +
                                "); use fewer control points");
    }
    c.qr_ = std::make_shared<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>>(c.filtered_);
    return c;
  }

  int rows() const noexcept { return static_cast<int>(basis_.rows()); }
  int control_points() const noexcept { return static_cast<int>(basis_.cols()); }
  double condition_number() const noexcept { return condition_; }
  const BasisMatrix& basis() const noexcept { return basis_; }
  const Eigen::MatrixXd& filtered_basis() const noexcept { return filtered_; }

  /// p* for a desired trajectory.
  Eigen::VectorXd control_points_for(const Eigen::VectorXd& desired) const {
    if (desired.size() != rows()) throw ArgumentError("fbs: trajectory length does not match compensator rows");
    return qr_->solve(desired);
  }

  /// Modified command x_dm = N p*.
  Eigen::VectorXd compensate(const Eigen::VectorXd& desired) const { return basis_ * control_points_for(desired); }

  /// Same as compensate, column by column.
  Eigen::MatrixXd compensate(const Eigen::MatrixXd& desired) const {
    if (desired.rows() != rows()) throw ArgumentError("fbs: trajectory length does not match compensator rows");
    return basis_ * qr_->solve(desired);
  }

  /// Dense C = N Ntilde^+.
  Eigen::MatrixXd operator_matrix(int cap = kDefaultOperatorCap) const {
    if (rows() > cap) {
      throw ArgumentError("fbs: refusing to materialize a " + std::to_string(rows()) + "x" + std::to_string(rows()) +
                          " operator (cap " + std::to_string(cap) + ")");
    }
    const Eigen::MatrixXd pinv = qr_->solve(Eigen::MatrixXd::Identity(rows(), rows()));
    return basis_ * pinv;
  }

 private:
  Compensator() = default;

  std::shared_ptr<const KnotVector> knots_;
  BasisMatrix basis_;
  Eigen::MatrixXd filtered_;
  std::shared_ptr<const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr_;
  double condition_ = 0.0;
};

}  // namespace fosep
