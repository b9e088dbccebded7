#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fosep/contour.hpp"
#include "fosep/experiment.hpp"
#include "fosep/fbs.hpp"
#include "fosep/servo.hpp"

using namespace fosep;

namespace {

DiscreteTransferFunction processed_printer_x() {
  const auto c = printer_model_x();
  return normalize_dc(stabilize(DiscreteTransferFunction(c.num, c.den, 1e-3)));
}

Eigen::VectorXd smooth_reference(int n) {
  Eigen::VectorXd d(n);
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    d(k) = 5.0 * (1.0 - std::cos(2.0 * std::numbers::pi * t)) + 0.3 * t * t;
  }
  return d;
}

const Toolpath& circle() {
  static const Toolpath c = Toolpath::circle({Point2(0, 0), 5.0, 0.0, 2.0 * std::numbers::pi});
  return c;
}

}  // namespace

TEST(Fbs, SatisfiesNormalEquations) {
  const auto model = processed_printer_x();
  const auto comp = Compensator::build(model, 700, 40, 5);
  const Eigen::VectorXd d = smooth_reference(700);
  const Eigen::VectorXd p = comp.control_points_for(d);
  const Eigen::MatrixXd& phi = comp.filtered_basis();
  const Eigen::VectorXd grad = phi.transpose() * (phi * p - d);
  const double scale = phi.norm() * phi.norm() * p.norm() + phi.norm() * d.norm();
  EXPECT_LE(grad.norm() / scale, 1e-9);
}

TEST(Fbs, FilteredBasisIsModelAppliedToBasis) {
  const auto model = processed_printer_x();
  const auto comp = Compensator::build(model, 300, 12, 3);
  for (int j = 0; j < 12; ++j) {
    const Eigen::VectorXd col = simulate(model, Eigen::VectorXd(comp.basis().col(j)));
    EXPECT_LE((col - comp.filtered_basis().col(j)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Fbs, IdentityModelProjectsOntoSplineSpace) {
  const auto comp = Compensator::build(DiscreteTransferFunction::identity(1e-3), 200, 15, 3);
  Eigen::VectorXd coeffs = Eigen::VectorXd::LinSpaced(15, -1.0, 2.0).array().square();
  const Eigen::VectorXd in_span = comp.basis() * coeffs;
  EXPECT_LE((comp.compensate(in_span) - in_span).cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::MatrixXd c = comp.operator_matrix();
  EXPECT_LE((c * c - c).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Fbs, OperatorMatrixMatchesCompensate) {
  const auto comp = Compensator::build(processed_printer_x(), 250, 20, 5);
  const Eigen::VectorXd d = smooth_reference(250);
  EXPECT_LE((comp.operator_matrix() * d - comp.compensate(d)).cwiseAbs().maxCoeff(), 1e-8 * d.cwiseAbs().maxCoeff());
  EXPECT_THROW(comp.operator_matrix(100), ArgumentError);
}

TEST(Fbs, CompensationReducesTrackingError) {
  const auto model = processed_printer_x();
  const AxisServo plain(model);
  const AxisServo pre(model, Compensator::build(model, 700, 40, 5));
  const Eigen::VectorXd d = smooth_reference(700);
  EXPECT_LT(pre.tracking_error(d).cwiseAbs().maxCoeff(), 0.2 * plain.tracking_error(d).cwiseAbs().maxCoeff());
}

TEST(Fbs, RejectsUnderdeterminedFits) {
  EXPECT_THROW(Compensator::build(processed_printer_x(), 30, 40, 5), RankDeficiencyError);
  EXPECT_THROW(Compensator::build(processed_printer_x(), 100, 4, 5), ArgumentError);
}

TEST(Servo, MatrixTrackingErrorIsColumnwise) {
  const auto model = processed_printer_x();
  const AxisServo pre(model, Compensator::build(model, 120, 10, 3));
  Eigen::MatrixXd v(120, 3);
  v.col(0) = smooth_reference(120);
  v.col(1) = Eigen::VectorXd::LinSpaced(120, 0.0, 1.0);
  v.col(2) = Eigen::VectorXd::Ones(120);
  const Eigen::MatrixXd e = pre.tracking_error(v);
  for (int j = 0; j < 3; ++j) {
    EXPECT_LE((e.col(j) - pre.tracking_error(Eigen::VectorXd(v.col(j)))).cwiseAbs().maxCoeff(),
              1e-12 * std::max(1.0, v.col(j).cwiseAbs().maxCoeff()));
  }
}

TEST(Contour, EstimateMatchesExactForSmallErrors) {
  // Analytic oracle: on a circle the true contour error is |p - c| - R.
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> s_dist(0.0, 1.0);
  std::uniform_real_distribution<double> n_dist(0.001, 0.05);  // up to 1% of R
  std::uniform_real_distribution<double> lag(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double s = s_dist(rng);
    const Point2 on = circle().eval(s);
    const double theta = circle().tangent_angle(s);
    const Point2 t(std::cos(theta), std::sin(theta));
    const Point2 inward(-t.y(), t.x());
    const double normal = (trial % 2 ? 1.0 : -1.0) * n_dist(rng);
    const double tangential = lag(rng) * std::abs(normal);
    const Point2 actual = on - normal * inward + tangential * t;
    const double truth = actual.norm() - 5.0;
    const std::vector<double> ex{on.x() - actual.x()};
    const std::vector<double> ey{on.y() - actual.y()};
    const double est = estimate_ce(ex, ey, std::vector<double>{theta})[0];
    EXPECT_NEAR(est, truth, 0.05 * std::abs(truth)) << "trial " << trial;
    const std::vector<Point2> pts{actual};
    EXPECT_NEAR(exact_ce(pts, circle())[0], truth, 1e-9);
  }
}

TEST(Contour, SignIsPositiveOutsideCounterclockwiseCircle) {
  const std::vector<Point2> outside{Point2(5.01, 0.0)};
  const std::vector<Point2> inside{Point2(4.99, 0.0)};
  EXPECT_GT(exact_ce(outside, circle())[0], 0.0);
  EXPECT_LT(exact_ce(inside, circle())[0], 0.0);
  const std::vector<double> s{0.0}, xd{5.0}, yd{0.0}, x{5.01}, y{0.0};
  const ContourResult r = contour_errors(circle(), s, xd, yd, x, y);
  EXPECT_NEAR(r.estimated_um[0], 10.0, 1e-9);
  EXPECT_NEAR(r.exact_um[0], 10.0, 1e-6);
  EXPECT_NEAR(r.max_exact_um, 10.0, 1e-6);
}

TEST(Contour, LengthMismatchIsRejected) {
  const std::vector<double> a{0.0, 0.1}, b{0.0};
  EXPECT_THROW(estimate_ce(a, b, a), ArgumentError);
}
