#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fosep/errors.hpp"
#include "fosep/geometry.hpp"
#include "fosep/lp.hpp"
#include "fosep/opt_time.hpp"
#include "fosep/splines.hpp"
#include "fosep/trajgen.hpp"

namespace fosep {

/// Path-domain feedrate optimization over q(s) = (ds/dt)^2, where s in [0, 1]
/// is the normalized arc length and q is a B-spline in s.
struct PathLpSpec {
  Toolpath path;
  KinematicLimits limits;
  double sample_time = 1e-3;  // output resampling period
  int grid_points = 1001;
  int degree = 5;
  int control_points = 40;
  KnotStyle knots = KnotStyle::kClamped;
  bool include_jerk = true;
  /// Zero dq/ds at both ends in the jerk phase, so the tangential
  /// acceleration starts and ends at zero like the jerk-limited reference.
  bool rest_acceleration = true;
  /// Upper-bound profile q* on the grid for the pseudo-jerk rows.
  std::optional<std::vector<double>> q_star{};

  void validate() const {
    limits.validate();
    if (!(sample_time > 0.0)) throw ArgumentError("path lp: sample time must be positive");
    if (grid_points < control_points) throw ArgumentError("path lp: grid must have at least as many points as control points");
    if (degree < 3) throw ArgumentError("path lp: jerk rows need a spline degree of at least 3");
    if (control_points < degree + 1) throw ArgumentError("path lp: need at least degree + 1 control points");
  }
};

struct PathLp {
  LpProblem problem;
  std::vector<double> grid;
  BasisMatrix b0, b1, b2;  // q, dq/ds, d2q/ds2 on the grid
  std::vector<RowFamily> families;
};

/// Rows per grid point: feedrate, acceleration (+x, -x, +y, -y), optionally
/// pseudo-jerk (same layout), then q >= 0. Equalities pin q (and in the jerk
/// phase optionally dq/ds) at both ends.
inline PathLp build_path_lp(const PathLpSpec& spec, bool include_jerk) {
  spec.validate();
  const int G = spec.grid_points;
  const int nc = spec.control_points;
  if (include_jerk) {
    if (!spec.q_star) throw ArgumentError("path lp: pseudo-jerk rows need a q* profile");
    if (static_cast<int>(spec.q_star->size()) != G) throw ArgumentError("path lp: q* does not match the grid");
  }
  PathLp out;
  out.problem = LpProblem(nc);
  out.grid = uniform_grid(G);
  const KnotVector knots = KnotVector::make(spec.knots, nc, spec.degree);
  out.b0 = basis_matrix_at(knots, out.grid, 0);
  out.b1 = basis_matrix_at(knots, out.grid, 1);
  out.b2 = basis_matrix_at(knots, out.grid, 2);

  const double L = spec.path.length();
  const double F = spec.limits.feedrate_mm();
  const double A = spec.limits.acceleration_mm();
  const double J = spec.limits.jerk_mm();

  std::vector<Eigen::Triplet<double>> t;
  std::vector<double> rhs;
  int row = 0;
  const auto add = [&](const Eigen::VectorXd& coef, double b) {
    detail::append_row(t, row++, coef);
    rhs.push_back(b);
  };
  const auto family = [&](const std::string& name, auto&& body) {
    RowFamily f{name, row, row};
    body();
    f.end = row;
    out.families.push_back(f);
  };

  std::vector<std::array<Point2, 4>> jets(static_cast<std::size_t>(G));
  for (int i = 0; i < G; ++i) jets[static_cast<std::size_t>(i)] = spec.path.jet(out.grid[static_cast<std::size_t>(i)], 3);

  family("feedrate", [&] {
    for (int i = 0; i < G; ++i) add(L * L * out.b0.row(i).transpose(), F * F);
  });
  family("acceleration", [&] {
    // axis acceleration = x'' q + x' q' / 2
    for (int axis = 0; axis < 2; ++axis) {
      for (int sign = 1; sign >= -1; sign -= 2) {
        for (int i = 0; i < G; ++i) {
          const auto& j = jets[static_cast<std::size_t>(i)];
          const Eigen::VectorXd coef = j[2](axis) * out.b0.row(i).transpose() + 0.5 * j[1](axis) * out.b1.row(i).transpose();
          add(sign * coef, A);
        }
      }
    }
  });
  if (include_jerk) {
    family("jerk", [&] {
      // axis jerk = sqrt(q) (x''' q + 3/2 x'' q' + x' q'' / 2), with sqrt(q) frozen at sqrt(q*)
      for (int axis = 0; axis < 2; ++axis) {
        for (int sign = 1; sign >= -1; sign -= 2) {
          for (int i = 0; i < G; ++i) {
            const auto& j = jets[static_cast<std::size_t>(i)];
            const double root = std::sqrt(std::max(0.0, (*spec.q_star)[static_cast<std::size_t>(i)]));
            const Eigen::VectorXd coef = root * (j[3](axis) * out.b0.row(i).transpose() +
                                                 1.5 * j[2](axis) * out.b1.row(i).transpose() +
                                                 0.5 * j[1](axis) * out.b2.row(i).transpose());
            add(sign * coef, J);
          }
        }
      }
    });
  }
  family("nonnegativity", [&] {
    for (int i = 0; i < G; ++i) add(-out.b0.row(i).transpose(), 0.0);
  });

  out.problem.inequality.resize(row, nc);
  out.problem.inequality.setFromTriplets(t.begin(), t.end());
  out.problem.inequality_rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), row);

  std::vector<Eigen::Triplet<double>> e;
  int erows = 0;
  detail::append_row(e, erows++, out.b0.row(0).transpose());
  detail::append_row(e, erows++, out.b0.row(G - 1).transpose());
  if (include_jerk && spec.rest_acceleration) {
    detail::append_row(e, erows++, out.b1.row(0).transpose());
    detail::append_row(e, erows++, out.b1.row(G - 1).transpose());
  }
  out.problem.equality.resize(erows, nc);
  out.problem.equality.setFromTriplets(e.begin(), e.end());
  out.problem.equality_rhs = Eigen::VectorXd::Zero(erows);

  const double ds = 1.0 / (G - 1);
  out.problem.cost = -ds * out.b0.colwise().sum().transpose();
  return out;
}

/// Converts q on a uniform s grid to a time-sampled trajectory. Between grid
/// points q is taken as linear in s, i.e. constant tangential acceleration,
/// for which dt = 2 ds / (sqrt(q_i) + sqrt(q_{i+1})) is exact and finite
/// even when one end is at rest.
inline TrajectoryProfile reconstruct_time(const std::vector<double>& q, double sample_time) {
  const std::size_t G = q.size();
  if (G < 2) throw ArgumentError("reconstruct_time: need at least two grid points");
  const double ds = 1.0 / static_cast<double>(G - 1);
  std::vector<double> t_node(G, 0.0);
  for (std::size_t i = 0; i + 1 < G; ++i) {
    const double r = std::sqrt(std::max(0.0, q[i])) + std::sqrt(std::max(0.0, q[i + 1]));
    if (!(r > 0.0)) throw NumericalError("reconstruct_time: path stops at an interior point (q = 0 on an interval)");
    t_node[i + 1] = t_node[i] + 2.0 * ds / r;
  }
  TrajectoryProfile out;
  out.sample_time = sample_time;
  out.cycle_time = t_node.back();
  const auto steps = static_cast<std::size_t>(std::ceil(out.cycle_time / sample_time - 1e-9));
  out.s.resize(steps + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = std::min(static_cast<double>(k) * sample_time, out.cycle_time);
    while (seg + 2 < G && t_node[seg + 1] <= t) ++seg;
    const double v0 = std::sqrt(std::max(0.0, q[seg]));
    const double acc = (std::max(0.0, q[seg + 1]) - std::max(0.0, q[seg])) / (2.0 * ds);
    const double tau = t - t_node[seg];
    const double s = static_cast<double>(seg) * ds + v0 * tau + 0.5 * acc * tau * tau;
    out.s[k] = std::clamp(s, static_cast<double>(seg) * ds, static_cast<double>(seg + 1) * ds);
  }
  out.s.back() = 1.0;
  return out;
}

struct PathLpResult {
  TrajectoryProfile profile;
  std::vector<double> q;       // final q on the grid
  std::vector<double> q_star;  // phase-one q (empty without jerk)
  LpSolution lp;
  double cycle_time = 0.0;
};

namespace detail {

inline std::vector<double> grid_values(const BasisMatrix& b0, const Eigen::VectorXd& c) {
  const Eigen::VectorXd q = b0 * c;
  std::vector<double> out(static_cast<std::size_t>(q.size()));
  for (Eigen::Index i = 0; i < q.size(); ++i) out[static_cast<std::size_t>(i)] = std::max(0.0, q(i));
  out.front() = 0.0;
  out.back() = 0.0;
  return out;
}

inline LpSolution solve_or_throw(const PathLp& built, const LpOptions& options, const char* phase) {
  LpSolution sol = solve(built.problem, options);
  if (sol.status == LpStatus::kInfeasible) {
    throw InfeasibleError(std::string("path lp infeasible in ") + phase, phase);
  }
  if (sol.status != LpStatus::kOptimal) {
    throw NumericalError(std::string("path lp: solver returned ") + to_string(sol.status) + " in " + phase);
  }
  return sol;
}

}  // namespace detail

/// Velocity/acceleration solve; with jerk, a second solve uses the first
/// solution as q* in the pseudo-jerk rows.
inline PathLpResult solve_path_lp(PathLpSpec spec, const LpOptions& options = {}) {
  PathLpResult res;
  const PathLp first = build_path_lp(spec, false);
  res.lp = detail::solve_or_throw(first, options, "velocity-acceleration");
  res.q = detail::grid_values(first.b0, res.lp.x);
  if (spec.include_jerk) {
    res.q_star = res.q;
    spec.q_star = res.q_star;
    const PathLp second = build_path_lp(spec, true);
    res.lp = detail::solve_or_throw(second, options, "jerk");
    res.q = detail::grid_values(second.b0, res.lp.x);
  }
  res.profile = reconstruct_time(res.q, spec.sample_time);
  res.cycle_time = res.profile.cycle_time;
  fill_commands(res.profile, spec.path);
  return res;
}

}  // namespace fosep
