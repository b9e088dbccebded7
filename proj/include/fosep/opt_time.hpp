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
#include "fosep/servo.hpp"
#include "fosep/splines.hpp"
#include "fosep/trajgen.hpp"

namespace fosep {

/// Time-domain feedrate optimization problem. The decision variables are the
/// control points p of a B-spline s(k) = N_s p sampled at zeta_k = k / (N - 1),
/// where N = linearization.size().
struct TimeLpSpec {
  Toolpath path;
  KinematicLimits limits;
  double sample_time = 1e-3;
  std::vector<double> linearization;  // s^e(k)
  int degree = 5;
  int control_points = 40;
  KnotStyle knots = KnotStyle::kClamped;
  bool include_acceleration = true;
  bool include_jerk = true;
  std::optional<double> ce_limit_um{};  // contour-error rows only when set
  std::optional<ServoPair> servo{};   // required with ce_limit_um
  double done_tolerance = 1e-5;

  int samples() const noexcept { return static_cast<int>(linearization.size()); }

  void validate() const {
    limits.validate();
    if (!(sample_time > 0.0)) throw ArgumentError("time lp: sample time must be positive");
    if (degree < 1) throw ArgumentError("time lp: spline degree must be >= 1");
    if (control_points < degree + 1) throw ArgumentError("time lp: need at least degree + 1 control points");
    if (samples() < control_points) throw ArgumentError("time lp: more control points than samples");
    if (linearization.front() != 0.0 || linearization.back() != 1.0) {
      throw ArgumentError("time lp: linearization points must start at 0 and end at 1");
    }
    for (std::size_t k = 1; k < linearization.size(); ++k) {
      if (!(linearization[k] >= linearization[k - 1]) || linearization[k] > 1.0) {
        throw ArgumentError("time lp: linearization points must be monotone in [0, 1]");
      }
    }
    if (ce_limit_um) {
      if (!(*ce_limit_um > 0.0) || !std::isfinite(*ce_limit_um)) {
        throw ArgumentError("time lp: contour-error limit must be positive");
      }
      if (!servo) throw ArgumentError("time lp: contour-error rows need servo models");
    }
    if (!(done_tolerance >= 0.0 && done_tolerance < 1.0)) throw ArgumentError("time lp: invalid done tolerance");
  }
};

/// Affine model of the path around s^e: x(s) ~ a_x (s - s^e) + f(s^e), written
/// as a_x s + b_x. theta is the tangent angle at s^e.
struct LinearizedPath {
  Eigen::VectorXd ax, bx, ay, by, theta;
};

inline LinearizedPath linearize_path(const Toolpath& path, const std::vector<double>& se) {
  const auto n = static_cast<Eigen::Index>(se.size());
  LinearizedPath lin{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const double s = se[static_cast<std::size_t>(k)];
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("linearize_path: s^e outside [0, 1]");
    const auto j = path.jet(s, 1);
    lin.ax(k) = j[1].x();
    lin.ay(k) = j[1].y();
    lin.bx(k) = j[0].x() - j[1].x() * s;
    lin.by(k) = j[0].y() - j[1].y() * s;
    lin.theta(k) = std::atan2(j[1].y(), j[1].x());
  }
  return lin;
}

/// Half-open block of LP inequality rows belonging to one constraint family.
struct RowFamily {
  std::string name;
  int begin = 0;
  int end = 0;
};

struct TimeLp {
  LpProblem problem;
  BasisMatrix basis;  // N_s
  LinearizedPath lin;
  std::vector<RowFamily> families;
};

namespace detail {

inline void append_row(std::vector<Eigen::Triplet<double>>& t, int row, const Eigen::VectorXd& coef) {
  for (Eigen::Index j = 0; j < coef.size(); ++j) {
    if (coef(j) != 0.0) t.emplace_back(row, static_cast<int>(j), coef(j));
  }
}

}  // namespace detail

/// Assembles the LP. Rows, in order: monotonicity, s <= 1, feedrate,
/// acceleration (+x, -x, +y, -y), jerk (same layout), contour error (+, -).
/// Difference stencils are backward and pad the start with the rest position.
inline TimeLp build_time_lp(const TimeLpSpec& spec) {
  spec.validate();
  const int N = spec.samples();
  const int np = spec.control_points;
  const double ts = spec.sample_time;
  const double L = spec.path.length();
  TimeLp out;
  out.problem = LpProblem(np);
  out.basis = basis_matrix(KnotVector::make(spec.knots, np, spec.degree), N);
  out.lin = linearize_path(spec.path, spec.linearization);
  const BasisMatrix& Ns = out.basis;
  const LinearizedPath& lin = out.lin;

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

  family("monotonicity", [&] {
    for (int k = 1; k < N; ++k) add(Ns.row(k - 1) - Ns.row(k), 0.0);
  });
  family("upper-bound", [&] {
    for (int k = 0; k < N; ++k) add(Ns.row(k), 1.0);
  });
  family("feedrate", [&] {
    const double F = spec.limits.feedrate_mm();
    for (int k = 1; k < N; ++k) add((L / ts) * (Ns.row(k) - Ns.row(k - 1)).transpose(), F);
  });

  // Axis position as (coefficients, constant); samples before k = 0 sit at the start point.
  const Point2 start = spec.path.eval(0.0);
  const auto axis_sample = [&](int axis, int k, Eigen::VectorXd& coef, double& c) {
    if (k < 0) {
      coef.setZero();
      c = axis == 0 ? start.x() : start.y();
      return;
    }
    const double a = axis == 0 ? lin.ax(k) : lin.ay(k);
    coef = a * Ns.row(k).transpose();
    c = axis == 0 ? lin.bx(k) : lin.by(k);
  };
  const auto difference_rows = [&](const std::vector<double>& stencil, double scale, double limit) {
    Eigen::VectorXd coef(np), tmp(np);
    for (int axis = 0; axis < 2; ++axis) {
      for (int sign = 1; sign >= -1; sign -= 2) {
        for (int k = 0; k < N; ++k) {
          coef.setZero();
          double c = 0.0;
          for (std::size_t j = 0; j < stencil.size(); ++j) {
            double cj = 0.0;
            axis_sample(axis, k - static_cast<int>(j), tmp, cj);
            coef += stencil[j] * tmp;
            c += stencil[j] * cj;
          }
          add(sign * scale * coef, limit - sign * scale * c);
        }
      }
    }
  };
  if (spec.include_acceleration) {
    family("acceleration", [&] { difference_rows({1.0, -2.0, 1.0}, 1.0 / (ts * ts), spec.limits.acceleration_mm()); });
  }
  if (spec.include_jerk) {
    family("jerk", [&] { difference_rows({1.0, -3.0, 3.0, -1.0}, 1.0 / (ts * ts * ts), spec.limits.jerk_mm()); });
  }
  if (spec.ce_limit_um) {
    family("contour", [&] {
      // eps = -sin(theta) (I - Gx Cx)(x - x0) + cos(theta) (I - Gy Cy)(y - y0), x = diag(a_x) N_s p + b_x.
      const Eigen::MatrixXd mx = spec.servo->x.tracking_error(Eigen::MatrixXd(lin.ax.asDiagonal() * Ns));
      const Eigen::MatrixXd my = spec.servo->y.tracking_error(Eigen::MatrixXd(lin.ay.asDiagonal() * Ns));
      const Eigen::VectorXd ox = spec.servo->x.tracking_error(Eigen::VectorXd(lin.bx.array() - start.x()));
      const Eigen::VectorXd oy = spec.servo->y.tracking_error(Eigen::VectorXd(lin.by.array() - start.y()));
      const Eigen::VectorXd sn = lin.theta.array().sin();
      const Eigen::VectorXd cs = lin.theta.array().cos();
      const Eigen::MatrixXd Q = -(sn.asDiagonal() * mx) + cs.asDiagonal() * my;
      const Eigen::VectorXd r = -sn.cwiseProduct(ox) + cs.cwiseProduct(oy);
      const double emax = *spec.ce_limit_um * 1e-3;
      for (int k = 0; k < N; ++k) add(Q.row(k).transpose(), emax - r(k));
      for (int k = 0; k < N; ++k) add(-Q.row(k).transpose(), emax + r(k));
    });
  }

  out.problem.inequality.resize(row, np);
  out.problem.inequality.setFromTriplets(t.begin(), t.end());
  out.problem.inequality_rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), row);

  std::vector<Eigen::Triplet<double>> e;
  detail::append_row(e, 0, Ns.row(0).transpose());
  detail::append_row(e, 1, Ns.row(N - 1).transpose());
  out.problem.equality.resize(2, np);
  out.problem.equality.setFromTriplets(e.begin(), e.end());
  out.problem.equality_rhs = Eigen::Vector2d(0.0, 1.0);

  out.problem.cost = -Ns.colwise().sum().transpose();
  return out;
}

/// Linearized axis commands diag(a) N_s p + b, the trajectory the LP rows
/// actually constrain.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> linearized_commands(const TimeLp& lp, const Eigen::VectorXd& p) {
  const Eigen::VectorXd s = lp.basis * p;
  return {lp.lin.ax.cwiseProduct(s) + lp.lin.bx, lp.lin.ay.cwiseProduct(s) + lp.lin.by};
}

struct TimeLpResult {
  TrajectoryProfile profile;   // trimmed at the cycle-time index
  std::vector<double> s_full;  // whole horizon, monotone and clamped to [0, 1]
  Eigen::VectorXd control;     // p_s
  LpSolution lp;
  int cycle_index = 0;
  double cycle_time = 0.0;
};

/// Index of the first sample with s >= 1 - tol.
inline int completion_index(const std::vector<double>& s, double tol) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] >= 1.0 - tol) return static_cast<int>(k);
  }
  return static_cast<int>(s.size()) - 1;
}

namespace detail {

inline std::string diagnose_infeasible(const TimeLp& built, const LpOptions& options) {
  // Drop families from the most to the least specific until the rest is feasible.
  const char* order[] = {"contour", "jerk", "acceleration"};
  std::vector<std::string> dropped;
  for (const char* name : order) {
    const auto it = std::find_if(built.families.begin(), built.families.end(), [&](const RowFamily& f) { return f.name == name; });
    if (it == built.families.end()) continue;
    dropped.push_back(name);
    LpProblem relaxed = built.problem;
    std::vector<int> keep;
    for (int r = 0; r < relaxed.inequality.rows(); ++r) {
      bool drop = false;
      for (const auto& f : built.families) {
        if (r >= f.begin && r < f.end && std::find(dropped.begin(), dropped.end(), f.name) != dropped.end()) drop = true;
      }
      if (!drop) keep.push_back(r);
    }
    SparseRows sub(static_cast<Eigen::Index>(keep.size()), relaxed.inequality.cols());
    std::vector<Eigen::Triplet<double>> t;
    Eigen::VectorXd b(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      for (SparseRows::InnerIterator it2(built.problem.inequality, keep[i]); it2; ++it2) {
        t.emplace_back(static_cast<int>(i), static_cast<int>(it2.col()), it2.value());
      }
      b(static_cast<Eigen::Index>(i)) = built.problem.inequality_rhs(keep[i]);
    }
    sub.setFromTriplets(t.begin(), t.end());
    relaxed.inequality = sub;
    relaxed.inequality_rhs = b;
    if (solve(relaxed, options).status == LpStatus::kOptimal) return name;
  }
  return "feedrate";
}

}  // namespace detail

/// Solves the LP and regenerates commands through the exact path.
/// Throws InfeasibleError (with the offending family) or NumericalError.
inline TimeLpResult solve_time_lp(const TimeLpSpec& spec, const LpOptions& options = {}) {
  const TimeLp built = build_time_lp(spec);
  TimeLpResult res;
  res.lp = solve(built.problem, options);
  if (res.lp.status == LpStatus::kInfeasible) {
    const std::string fam = detail::diagnose_infeasible(built, options);
    throw InfeasibleError("time lp infeasible; binding family: " + fam, fam);
  }
  if (res.lp.status != LpStatus::kOptimal) {
    throw NumericalError(std::string("time lp: solver returned ") + to_string(res.lp.status));
  }
  res.control = res.lp.x;
  const Eigen::VectorXd s = built.basis * res.control;
  res.s_full.resize(static_cast<std::size_t>(s.size()));
  double running = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    running = std::clamp(std::max(running, s(k)), 0.0, 1.0);
    res.s_full[static_cast<std::size_t>(k)] = running;
  }
  res.cycle_index = completion_index(res.s_full, spec.done_tolerance);
  res.cycle_time = spec.sample_time * res.cycle_index;
  res.profile.sample_time = spec.sample_time;
  res.profile.s.assign(res.s_full.begin(), res.s_full.begin() + res.cycle_index + 1);
  res.profile.cycle_time = res.cycle_time;
  fill_commands(res.profile, spec.path);
  return res;
}

struct PassReport {
  int pass = 0;
  double cycle_time = 0.0;
  std::string status;
};

struct RelinearizeResult {
  TimeLpResult best;
  int best_pass = 1;
  std::vector<double> best_linearization;  // s^e the best pass was solved with
  std::vector<PassReport> passes;
};

/// Sequential linearization: each pass re-linearizes around the previous
/// solution. Stops early when the cycle time grows on two consecutive passes
/// or a later pass fails; the best pass is returned.
inline RelinearizeResult relinearize(TimeLpSpec spec, int passes, const LpOptions& options = {}) {
  if (passes < 1) throw ArgumentError("relinearize: passes must be >= 1");
  RelinearizeResult out;
  out.best = solve_time_lp(spec, options);
  out.best_linearization = spec.linearization;
  out.passes.push_back({1, out.best.cycle_time, "optimal"});
  TimeLpResult last = out.best;
  int increases = 0;
  for (int pass = 2; pass <= passes; ++pass) {
    spec.linearization = last.s_full;
    spec.linearization.front() = 0.0;
    spec.linearization.back() = 1.0;
    try {
      TimeLpResult next = solve_time_lp(spec, options);
      out.passes.push_back({pass, next.cycle_time, "optimal"});
      increases = next.cycle_time > last.cycle_time ? increases + 1 : 0;
      if (next.cycle_time < out.best.cycle_time) {
        out.best = next;
        out.best_pass = pass;
        out.best_linearization = spec.linearization;
      }
      last = std::move(next);
    } catch (const InfeasibleError& e) {
      out.passes.push_back({pass, 0.0, std::string("infeasible:") + e.family()});
      break;
    } catch (const NumericalError&) {
      out.passes.push_back({pass, 0.0, "numerical-failure"});
      break;
    }
    if (increases >= 2) break;
  }
  return out;
}

}  // namespace fosep
