#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fosep/experiment.hpp"
#include "fosep/opt_path.hpp"
#include "fosep/opt_time.hpp"

using namespace fosep;

namespace {

ExperimentConfig table1_config(bool jerk) {
  ExperimentConfig cfg;
  cfg.limits = "conservative";
  cfg.ce_limit_um.reset();
  cfg.jerk = jerk;
  return cfg;
}

ExperimentConfig table2_config(double ce_um) {
  ExperimentConfig cfg;
  cfg.limits = "aggressive";
  cfg.ce_limit_um = ce_um;
  return cfg;
}

// Re-evaluates A x <= b and E x = e row by row, each row scaled by its
// largest coefficient.
double row_violation(const LpProblem& p, const Eigen::VectorXd& x) {
  double worst = 0.0;
  const Eigen::MatrixXd a = Eigen::MatrixXd(p.inequality);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double scale = std::max(a.row(i).cwiseAbs().maxCoeff(), 1e-300);
    worst = std::max(worst, (a.row(i).dot(x) - p.inequality_rhs(i)) / scale);
  }
  const Eigen::MatrixXd e = Eigen::MatrixXd(p.equality);
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double scale = std::max(e.row(i).cwiseAbs().maxCoeff(), 1e-300);
    worst = std::max(worst, std::abs(e.row(i).dot(x) - p.equality_rhs(i)) / scale);
  }
  return worst;
}

}  // namespace

TEST(Linearize, IsTangentAtExpansionPoints) {
  const Toolpath c = Toolpath::circle({Point2(0, 0), 5.0, 0.0, 2.0 * std::numbers::pi});
  const std::vector<double> se{0.0, 0.1, 0.5, 0.93, 1.0};
  const LinearizedPath lin = linearize_path(c, se);
  for (std::size_t k = 0; k < se.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const Point2 p = c.eval(se[k]);
    EXPECT_NEAR(lin.ax(i) * se[k] + lin.bx(i), p.x(), 1e-12);
    EXPECT_NEAR(lin.ay(i) * se[k] + lin.by(i), p.y(), 1e-12);
    EXPECT_NEAR(lin.ax(i), c.derivs(se[k], 1).x(), 1e-12);
    EXPECT_NEAR(lin.theta(i), c.tangent_angle(se[k]), 1e-12);
  }
  EXPECT_THROW(linearize_path(c, {0.0, 1.2}), DomainError);
}

TEST(TimeLp, ConstraintCountsPerFamily) {
  const Experiment exp(table2_config(14.0));
  const TimeLpSpec spec = exp.time_spec(true, "aggressive");
  const int n = spec.samples();
  const TimeLp lp = build_time_lp(spec);
  ASSERT_EQ(lp.families.size(), 6u);
  const std::vector<std::pair<std::string, int>> expected{{"monotonicity", n - 1}, {"upper-bound", n},
                                                          {"feedrate", n - 1},    {"acceleration", 4 * n},
                                                          {"jerk", 4 * n},        {"contour", 2 * n}};
  int begin = 0;
  for (std::size_t f = 0; f < expected.size(); ++f) {
    EXPECT_EQ(lp.families[f].name, expected[f].first);
    EXPECT_EQ(lp.families[f].begin, begin);
    EXPECT_EQ(lp.families[f].end - lp.families[f].begin, expected[f].second);
    begin = lp.families[f].end;
  }
  EXPECT_EQ(lp.problem.inequality.rows(), begin);
  EXPECT_EQ(lp.problem.equality.rows(), 2);
  EXPECT_EQ(lp.problem.variables(), 40);
}

TEST(TimeLp, SolutionSatisfiesKinematicsRecomputedFromScratch) {
  const Experiment exp(table1_config(true));
  const TimeLpSpec spec = exp.time_spec(false, "conservative");
  const TimeLpResult res = solve_time_lp(spec);
  const TimeLp lp = build_time_lp(spec);
  EXPECT_LE(row_violation(lp.problem, res.control), 1e-6);

  // Linearized axis commands, differenced with rest before the first sample.
  const auto [x, y] = linearized_commands(lp, res.control);
  const Eigen::VectorXd s = lp.basis * res.control;
  const double ts = spec.sample_time;
  const double L = spec.path.length();
  const Point2 start = spec.path.eval(0.0);
  const auto at = [&](const Eigen::VectorXd& v, int k, double rest) { return k < 0 ? rest : v(k); };
  for (int k = 0; k < s.size(); ++k) {
    if (k > 0) {
      EXPECT_LE(L * (s(k) - s(k - 1)) / ts, 30.0 * (1 + 1e-6));
      EXPECT_GE(s(k) - s(k - 1), -1e-9);
    }
    for (const auto& [v, rest] : {std::pair{x, start.x()}, std::pair{y, start.y()}}) {
      const double acc = (at(v, k, rest) - 2 * at(v, k - 1, rest) + at(v, k - 2, rest)) / (ts * ts);
      const double jerk = (at(v, k, rest) - 3 * at(v, k - 1, rest) + 3 * at(v, k - 2, rest) - at(v, k - 3, rest)) /
                          (ts * ts * ts);
      EXPECT_LE(std::abs(acc), 500.0 * (1 + 1e-6) + 1e-6) << k;
      EXPECT_LE(std::abs(jerk), 5000.0 * (1 + 1e-6) + 1e-3) << k;
    }
  }
  EXPECT_NEAR(s(0), 0.0, 1e-9);
  EXPECT_NEAR(s(s.size() - 1), 1.0, 1e-9);
  EXPECT_EQ(res.cycle_time, res.cycle_index * ts);
  EXPECT_GE(res.s_full[static_cast<std::size_t>(res.cycle_index)], 1.0 - spec.done_tolerance);
}

TEST(TimeLp, ContourRowsBoundTheSimulatedLinearizedError) {
  const Experiment exp(table2_config(14.0));
  for (bool compensated : {false, true}) {
    const std::string init = compensated ? "aggressive" : "conservative";
    const TimeLpSpec spec = exp.time_spec(compensated, init);
    const TimeLpResult res = solve_time_lp(spec);
    // Oracle: simulate the servo on the linearized commands directly.
    const TimeLp lp = build_time_lp(spec);
    const auto [x, y] = linearized_commands(lp, res.control);
    const Point2 start = spec.path.eval(0.0);
    const ServoPair sv = exp.servo(compensated, spec.samples());
    const Eigen::VectorXd dx = x.array() - start.x();
    const Eigen::VectorXd dy = y.array() - start.y();
    const Eigen::VectorXd ex = dx - simulate(sv.x.model(), sv.x.command(dx));
    const Eigen::VectorXd ey = dy - simulate(sv.y.model(), sv.y.command(dy));
    double worst = 0.0;
    for (Eigen::Index k = 0; k < ex.size(); ++k) {
      const double th = lp.lin.theta(k);
      worst = std::max(worst, std::abs(-std::sin(th) * ex(k) + std::cos(th) * ey(k)) * 1e3);
    }
    EXPECT_LE(worst, 14.0 * (1 + 1e-6)) << (compensated ? "fo-sep" : "fo");
    EXPECT_NEAR(worst, Experiment::linearized_ce_um(spec, res.control), 1e-9);
  }
}

TEST(TimeLp, InfeasibleContourLimitNamesTheFamily) {
  const Experiment exp(table2_config(1e-4));
  const TimeLpSpec spec = exp.time_spec(false, "aggressive");
  try {
    solve_time_lp(spec);
    FAIL() << "expected infeasibility";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.family(), "contour");
  }
}

TEST(TimeLp, RejectsInvalidSpecs) {
  const Experiment exp(table1_config(false));
  TimeLpSpec spec = exp.time_spec(false, "conservative");
  spec.linearization.back() = 0.9;
  EXPECT_THROW(build_time_lp(spec), ArgumentError);
  spec = exp.time_spec(false, "conservative");
  spec.ce_limit_um = 10.0;  // no servo channels
  EXPECT_THROW(build_time_lp(spec), ArgumentError);
  spec = exp.time_spec(false, "conservative");
  spec.control_points = 3;
  EXPECT_THROW(build_time_lp(spec), ArgumentError);
}

// A looser contour limit only removes constraints, so the LP optimum (summed
// progress of s over the horizon) cannot get worse. The completion time is a
// threshold crossing of s and carries no such guarantee.
TEST(TimeLp, LargerContourToleranceNeverLosesProgress) {
  for (bool compensated : {false, true}) {
    double previous = std::numeric_limits<double>::infinity();
    for (double ce : {10.0, 20.0, 40.0, 80.0}) {
      const Experiment exp(table2_config(ce));
      const TimeLpResult res = solve_time_lp(exp.time_spec(compensated, "conservative"));
      ASSERT_EQ(res.lp.status, LpStatus::kOptimal) << "ce " << ce;
      EXPECT_LE(res.lp.objective, previous + 1e-7 * std::abs(res.lp.objective)) << "ce " << ce;
      previous = res.lp.objective;
    }
  }
}

TEST(TimeLp, RelinearizationReportsEveryPass) {
  const Experiment exp(table1_config(false));
  const RelinearizeResult r = relinearize(exp.time_spec(false, "conservative"), 3);
  ASSERT_GE(r.passes.size(), 1u);
  EXPECT_EQ(r.passes.front().pass, 1);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : r.passes) {
    if (p.status == "optimal") best = std::min(best, p.cycle_time);
  }
  EXPECT_EQ(r.best.cycle_time, best);
  EXPECT_THROW(relinearize(exp.time_spec(false, "conservative"), 0), ArgumentError);
}

TEST(PathLp, ConstraintCountsPerFamily) {
  const Experiment exp(table1_config(true));
  PathLpSpec spec = exp.path_spec();
  spec.q_star = std::vector<double>(static_cast<std::size_t>(spec.grid_points), 1.0);
  const int g = spec.grid_points;
  const PathLp without = build_path_lp(spec, false);
  EXPECT_EQ(without.problem.inequality.rows(), g + 4 * g + g);
  EXPECT_EQ(without.problem.equality.rows(), 2);
  const PathLp with = build_path_lp(spec, true);
  EXPECT_EQ(with.problem.inequality.rows(), g + 4 * g + 4 * g + g);
  EXPECT_EQ(with.problem.equality.rows(), 4);
  spec.rest_acceleration = false;
  EXPECT_EQ(build_path_lp(spec, true).problem.equality.rows(), 2);
}

TEST(PathLp, SolutionSatisfiesItsRows) {
  for (bool jerk : {false, true}) {
    const Experiment exp(table1_config(jerk));
    PathLpSpec spec = exp.path_spec();
    const PathLpResult res = solve_path_lp(spec);
    if (jerk) spec.q_star = res.q_star;
    const PathLp built = build_path_lp(spec, jerk);
    EXPECT_LE(row_violation(built.problem, res.lp.x), 1e-6);
    // feedrate along the path never exceeds F
    for (double q : res.q) EXPECT_LE(spec.path.length() * std::sqrt(q), 30.0 * (1 + 1e-6));
  }
}

TEST(PathLp, ReconstructTimeForConstantAcceleration) {
  // q = 2 a s (constant tangential acceleration a from rest) -> s = a t^2 / 2.
  const int g = 101;
  const double a = 8.0;
  std::vector<double> q(g);
  for (int i = 0; i < g; ++i) q[static_cast<std::size_t>(i)] = 2.0 * a * i / (g - 1.0);
  const TrajectoryProfile p = reconstruct_time(q, 1e-3);
  EXPECT_NEAR(p.cycle_time, std::sqrt(2.0 / a), 1e-12);
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    const double t = static_cast<double>(k) * 1e-3;
    EXPECT_NEAR(p.s[k], 0.5 * a * t * t, 1e-12);
  }
  EXPECT_EQ(p.s.back(), 1.0);
}

TEST(PathLp, InteriorStopIsReported) {
  std::vector<double> q(11, 1.0);
  q[4] = q[5] = 0.0;
  EXPECT_THROW(reconstruct_time(q, 1e-3), NumericalError);
}

TEST(Optimizers, PathBasedIsSlowerThanTimeBasedWithJerk) {
  const Experiment exp(table1_config(true));
  const RunResult time_based = exp.run(Algorithm::kFoTime);
  const RunResult path_based = exp.run(Algorithm::kFoPath);
  EXPECT_GE(path_based.cycle_time, time_based.cycle_time);
}

TEST(Optimizers, OptimizedBeatsTapWithoutCeLimit) {
  const Experiment exp(table1_config(false));
  EXPECT_LT(exp.run(Algorithm::kFoPath).cycle_time, exp.run(Algorithm::kTap).cycle_time);
}
