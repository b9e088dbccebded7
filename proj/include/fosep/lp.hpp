#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "fosep/errors.hpp"

namespace fosep {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// min c'x  s.t.  A x <= b,  E x = f,  lower <= x <= upper.
/// Infinite bounds are allowed; every matrix entry must be finite.
struct LpProblem {
  Eigen::VectorXd cost;
  SparseRows inequality;
  Eigen::VectorXd inequality_rhs;
  SparseRows equality;
  Eigen::VectorXd equality_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  explicit LpProblem(int variables = 0)
      : cost(Eigen::VectorXd::Zero(variables)),
        inequality(0, variables),
        inequality_rhs(0),
        equality(0, variables),
        equality_rhs(0),
        lower(Eigen::VectorXd::Constant(variables, -std::numeric_limits<double>::infinity())),
        upper(Eigen::VectorXd::Constant(variables, std::numeric_limits<double>::infinity())) {}

  int variables() const noexcept { return static_cast<int>(cost.size()); }

  void validate() const {
    const Eigen::Index n = cost.size();
    if (inequality.cols() != n || equality.cols() != n || lower.size() != n || upper.size() != n) {
      throw ArgumentError("lp: column dimensions are inconsistent");
    }
    if (inequality.rows() != inequality_rhs.size() || equality.rows() != equality_rhs.size()) {
      throw ArgumentError("lp: right-hand side dimensions are inconsistent");
    }
    const auto finite = [](const auto& m) { return m.allFinite(); };
    if (!finite(cost) || !finite(inequality_rhs) || !finite(equality_rhs)) {
      throw ArgumentError("lp: NaN or Inf in cost or right-hand side");
    }
    for (Eigen::Index k = 0; k < inequality.outerSize(); ++k) {
      for (SparseRows::InnerIterator it(inequality, k); it; ++it) {
        if (!std::isfinite(it.value())) throw ArgumentError("lp: NaN or Inf in inequality matrix");
      }
    }
    for (Eigen::Index k = 0; k < equality.outerSize(); ++k) {
      for (SparseRows::InnerIterator it(equality, k); it; ++it) {
        if (!std::isfinite(it.value())) throw ArgumentError("lp: NaN or Inf in equality matrix");
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i) || lower(i) == std::numeric_limits<double>::infinity() ||
          upper(i) == -std::numeric_limits<double>::infinity()) {
        throw ArgumentError("lp: invalid variable bounds");
      }
    }
  }
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kNumericalFailure };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

struct LpSolution {
  LpStatus status = LpStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Largest violation over all rows and bounds, each row scaled by the
  /// infinity norm of its coefficients.
  double max_violation = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double feasibility_tol = 1e-9;
  double absolute_gap_tol = 1e-9;
  double relative_gap_tol = 1e-9;
  int max_iterations = 200;
  bool trace = false;  // per-iteration residuals on stderr
};

/// Scaled row violation of x, as reported in LpSolution::max_violation.
inline double max_scaled_violation(const LpProblem& p, const Eigen::VectorXd& x) {
  double worst = 0.0;
  const auto row_scan = [&](const SparseRows& m, const Eigen::VectorXd& rhs, bool two_sided) {
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      double dot = 0.0;
      double norm = 0.0;
      for (SparseRows::InnerIterator it(m, r); it; ++it) {
        dot += it.value() * x(it.col());
        norm = std::max(norm, std::abs(it.value()));
      }
      const double scale = norm > 0.0 ? norm : 1.0;
      const double v = two_sided ? std::abs(dot - rhs(r)) : dot - rhs(r);
      worst = std::max(worst, v / scale);
    }
  };
  row_scan(p.inequality, p.inequality_rhs, false);
  row_scan(p.equality, p.equality_rhs, true);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::isfinite(p.lower(i))) worst = std::max(worst, p.lower(i) - x(i));
    if (std::isfinite(p.upper(i))) worst = std::max(worst, x(i) - p.upper(i));
  }
  return worst;
}

namespace detail {

// Row-equilibrated standard form: min c'x s.t. G x + s = h, s >= 0, E x = f.
struct ScaledLp {
  SparseRows G;
  Eigen::VectorXd h;
  SparseRows E;
  Eigen::VectorXd f;
  Eigen::VectorXd c;
  bool trivially_infeasible = false;
};

inline ScaledLp scale_problem(const LpProblem& p) {
  const int n = p.variables();
  ScaledLp out;
  std::vector<Eigen::Triplet<double>> g_entries;
  std::vector<double> h_values;
  int g_rows = 0;
  const auto add_rows = [&](const SparseRows& m, const Eigen::VectorXd& rhs, std::vector<Eigen::Triplet<double>>& dst,
                            std::vector<double>& dst_rhs, int& row_count, bool equality) {
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      double norm = 0.0;
      for (SparseRows::InnerIterator it(m, r); it; ++it) norm = std::max(norm, std::abs(it.value()));
      if (norm == 0.0) {
        const bool ok = equality ? std::abs(rhs(r)) <= 1e-12 : rhs(r) >= -1e-12;
        if (!ok) out.trivially_infeasible = true;
        continue;
      }
      for (SparseRows::InnerIterator it(m, r); it; ++it) {
        if (it.value() != 0.0) dst.emplace_back(row_count, static_cast<int>(it.col()), it.value() / norm);
      }
      dst_rhs.push_back(rhs(r) / norm);
      ++row_count;
    }
  };
  add_rows(p.inequality, p.inequality_rhs, g_entries, h_values, g_rows, false);
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(p.upper(i))) {
      g_entries.emplace_back(g_rows++, i, 1.0);
      h_values.push_back(p.upper(i));
    }
    if (std::isfinite(p.lower(i))) {
      g_entries.emplace_back(g_rows++, i, -1.0);
      h_values.push_back(-p.lower(i));
    }
  }
  out.G.resize(g_rows, n);
  out.G.setFromTriplets(g_entries.begin(), g_entries.end());
  out.h = Eigen::Map<Eigen::VectorXd>(h_values.data(), static_cast<Eigen::Index>(h_values.size()));

  std::vector<Eigen::Triplet<double>> e_entries;
  std::vector<double> f_values;
  int e_rows = 0;
  add_rows(p.equality, p.equality_rhs, e_entries, f_values, e_rows, true);
  out.E.resize(e_rows, n);
  out.E.setFromTriplets(e_entries.begin(), e_entries.end());
  out.f = Eigen::Map<Eigen::VectorXd>(f_values.data(), static_cast<Eigen::Index>(f_values.size()));

  const double cnorm = p.cost.lpNorm<Eigen::Infinity>();
  out.c = cnorm > 0.0 ? Eigen::VectorXd(p.cost / cnorm) : p.cost;
  return out;
}

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

inline double max_step(double v, double dv) {
  return dv < 0.0 ? -v / dv : std::numeric_limits<double>::infinity();
}

// Solves  [H  E'] [dx]   [r1]
//         [E  0 ] [dy] = [r2]
// with a regularized LU factorization plus iterative refinement.
class SaddleSolver {
 public:
  SaddleSolver(const Eigen::MatrixXd& H, const Eigen::MatrixXd& E) : H_(H), E_(E) {
    const Eigen::Index n = H.rows();
    const Eigen::Index p = E.rows();
    // Symmetric diagonal scaling so the x block has a unit diagonal.
    scale_ = Eigen::VectorXd::Ones(n + p);
    for (Eigen::Index i = 0; i < n; ++i) scale_(i) = 1.0 / std::sqrt(std::max(H(i, i), 1e-300) + 1e-12);
    constexpr double kReg = 1e-13;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = scale_.head(n).asDiagonal() * H * scale_.head(n).asDiagonal();
    K.topLeftCorner(n, n).diagonal().array() += kReg;
    if (p > 0) {
      K.bottomLeftCorner(p, n) = E * scale_.head(n).asDiagonal();
      K.topRightCorner(n, p) = K.bottomLeftCorner(p, n).transpose();
      K.bottomRightCorner(p, p).diagonal().array() -= kReg;
    }
    lu_.compute(K);
  }

  void solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx, Eigen::VectorXd& dy) const {
    const Eigen::Index n = H_.rows();
    const Eigen::Index p = E_.rows();
    Eigen::VectorXd rhs(n + p);
    rhs << r1, r2;
    const auto scaled_solve = [&](const Eigen::VectorXd& r) {
      return Eigen::VectorXd(scale_.cwiseProduct(lu_.solve(scale_.cwiseProduct(r))));
    };
    Eigen::VectorXd sol = scaled_solve(rhs);
    const double target = 1e-15 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    for (int pass = 0; pass < 8; ++pass) {
      Eigen::VectorXd res(n + p);
      res.head(n) = r1 - H_ * sol.head(n);
      if (p > 0) {
        res.head(n) -= E_.transpose() * sol.tail(p);
        res.tail(p) = r2 - E_ * sol.head(n);
      }
      if (res.lpNorm<Eigen::Infinity>() <= target) break;
      sol += scaled_solve(res);
    }
    dx = sol.head(n);
    dy = sol.tail(p);
  }

 private:
  const Eigen::MatrixXd& H_;
  const Eigen::MatrixXd& E_;
  Eigen::VectorXd scale_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

// H = G' diag(d) G accumulated row by row.
inline Eigen::MatrixXd weighted_gram(const SparseRows& G, const Eigen::VectorXd& d) {
  const Eigen::Index n = G.cols();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::pair<int, double>> row;
  for (Eigen::Index r = 0; r < G.outerSize(); ++r) {
    row.clear();
    for (SparseRows::InnerIterator it(G, r); it; ++it) row.emplace_back(static_cast<int>(it.col()), it.value());
    const double w = d(r);
    for (std::size_t a = 0; a < row.size(); ++a) {
      const double va = w * row[a].second;
      for (std::size_t b = a; b < row.size(); ++b) H(row[a].first, row[b].first) += va * row[b].second;
    }
  }
  return H.selfadjointView<Eigen::Upper>();
}

}  // namespace detail

/// Homogeneous self-dual interior-point method with Mehrotra predictor-corrector
/// steps on the row-equilibrated problem. Deterministic: no randomization and
/// fixed iteration rules.
inline LpSolution solve(const LpProblem& problem, const LpOptions& options = {}) {
  problem.validate();
  const int n = problem.variables();
  const detail::ScaledLp lp = detail::scale_problem(problem);
  LpSolution out;
  out.x = Eigen::VectorXd::Zero(n);
  if (lp.trivially_infeasible) {
    out.status = LpStatus::kInfeasible;
    out.max_violation = max_scaled_violation(problem, out.x);
    return out;
  }
  const SparseRows& G = lp.G;
  const SparseRows& Es = lp.E;
  const Eigen::MatrixXd E = Eigen::MatrixXd(Es);
  const Eigen::VectorXd& h = lp.h;
  const Eigen::VectorXd& f = lp.f;
  const Eigen::VectorXd& c = lp.c;
  const Eigen::Index m = G.rows();
  const Eigen::Index p = E.rows();

  const auto finish = [&](LpStatus status, const Eigen::VectorXd& x) {
    out.status = status;
    out.x = x;
    out.objective = problem.cost.dot(x);
    out.max_violation = max_scaled_violation(problem, x);
    return out;
  };

  if (m == 0) {
    // Only equalities: the objective is bounded iff c lies in the row space of E.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (p > 0) x = E.completeOrthogonalDecomposition().solve(f);
    if (p > 0 && (E * x - f).lpNorm<Eigen::Infinity>() > options.feasibility_tol) return finish(LpStatus::kInfeasible, x);
    Eigen::VectorXd residual = c;
    if (p > 0) {
      const Eigen::VectorXd y = E.transpose().completeOrthogonalDecomposition().solve(c);
      residual = c - E.transpose() * y;
    }
    return finish(residual.lpNorm<Eigen::Infinity>() > options.feasibility_tol ? LpStatus::kUnbounded : LpStatus::kOptimal, x);
  }

  const double h_norm = std::max(1.0, std::max(h.lpNorm<Eigen::Infinity>(), p > 0 ? f.lpNorm<Eigen::Infinity>() : 0.0));
  const double c_norm = std::max(1.0, c.lpNorm<Eigen::Infinity>());

  // Initial point: least-squares primal estimate, unit duals, then the
  // usual balancing shifts so that no slack or dual starts near zero.
  Eigen::VectorXd x, y, z, s;
  {
    const Eigen::MatrixXd H0 = detail::weighted_gram(G, Eigen::VectorXd::Ones(m));
    const detail::SaddleSolver init(H0, E);
    Eigen::VectorXd dy;
    init.solve(G.transpose() * h, f, x, dy);
    s = h - G * x;
    s.array() += std::max(0.0, -1.5 * s.minCoeff());
    z = Eigen::VectorXd::Ones(m);
    y = Eigen::VectorXd::Zero(p);
    const double sz = s.dot(z) + 1e-12 * static_cast<double>(m);
    s.array() += 0.5 * sz / z.sum() + 1e-8;
    z.array() += 0.5 * sz / s.sum();
  }
  double tau = 1.0;
  double kappa = 1.0;

  Eigen::VectorXd best_x = x;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter;
    const Eigen::VectorXd Gx = G * x;
    const Eigen::VectorXd Gtz = G.transpose() * z;
    const Eigen::VectorXd Ety = p > 0 ? Eigen::VectorXd(E.transpose() * y) : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd rx = Ety + Gtz + c * tau;
    const Eigen::VectorXd ry = p > 0 ? Eigen::VectorXd(E * x - f * tau) : Eigen::VectorXd(0);
    const Eigen::VectorXd rz = Gx + s - h * tau;
    const double cx = c.dot(x);
    const double by = p > 0 ? f.dot(y) : 0.0;
    const double hz = h.dot(z);
    const double rt = kappa + cx + by + hz;
    const double mu = (s.dot(z) + tau * kappa) / static_cast<double>(m + 1);

    if (!std::isfinite(mu) || !x.allFinite() || !z.allFinite()) break;

    // Convergence tests on the de-homogenized iterate.
    const double pres = std::max(ry.size() ? ry.lpNorm<Eigen::Infinity>() : 0.0, rz.lpNorm<Eigen::Infinity>()) / tau / h_norm;
    // The dual residual is a cancellation between c and G'z, so it is judged
    // relative to the larger of the two.
    const double dres = rx.lpNorm<Eigen::Infinity>() / tau / std::max(c_norm, z.lpNorm<Eigen::Infinity>() / tau);
    const double pcost = cx / tau;
    const double dcost = -(hz + by) / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double rel_gap = gap / std::max(1e-12, std::min(std::abs(pcost), std::abs(dcost)));
    best_x = x / tau;
    if (options.trace) {
      std::fprintf(stderr, "lp %3d pres=%.2e dres=%.2e gap=%.2e pcost=%.10g tau=%.2e kappa=%.2e z=%.2e farkas=%.2e/%.2e\n",
                   iter, pres, dres, gap, pcost, tau, kappa, z.lpNorm<Eigen::Infinity>() / tau,
                   (Ety + Gtz).lpNorm<Eigen::Infinity>(), -(hz + by));
    }
    if (pres <= options.feasibility_tol && dres <= options.feasibility_tol &&
        (gap <= options.absolute_gap_tol || rel_gap <= options.relative_gap_tol)) {
      return finish(LpStatus::kOptimal, x / tau);
    }
    // Infeasibility certificates. Once tau has collapsed against kappa the
    // iterates are a homogeneous ray, and E'y + G'z can only cancel down to
    // rounding in its two terms; the looser test measures it that way.
    const bool ray = tau <= 1e-12 * kappa;
    if (hz + by < 0.0) {
      const Eigen::VectorXd farkas = Ety + Gtz;
      const double cert = farkas.lpNorm<Eigen::Infinity>() / (-(hz + by));
      if (cert <= options.feasibility_tol) return finish(LpStatus::kInfeasible, x / tau);
      const double terms = std::max(Ety.lpNorm<Eigen::Infinity>(), Gtz.lpNorm<Eigen::Infinity>());
      if (ray && farkas.lpNorm<Eigen::Infinity>() <= options.feasibility_tol * terms) {
        return finish(LpStatus::kInfeasible, x / tau);
      }
    }
    if (cx < 0.0) {
      const double e_part = p > 0 ? (E * x).lpNorm<Eigen::Infinity>() : 0.0;
      const double cert = std::max(e_part, (Gx + s).lpNorm<Eigen::Infinity>()) / (-cx);
      if (cert <= options.feasibility_tol) return finish(LpStatus::kUnbounded, x / tau);
      const double terms = std::max(Gx.lpNorm<Eigen::Infinity>(), s.lpNorm<Eigen::Infinity>());
      if (ray && std::max(e_part, (Gx + s).lpNorm<Eigen::Infinity>()) <= options.feasibility_tol * terms) {
        return finish(LpStatus::kUnbounded, x / tau);
      }
    }

    const Eigen::VectorXd d = z.cwiseQuotient(s);
    const Eigen::MatrixXd H = detail::weighted_gram(G, d);
    const detail::SaddleSolver kkt(H, E);

    // Newton system  E'dy + G'dz = bx,  E dx = by,  G dx - W dz = bz  with
    // W = s / z, eliminated to the saddle system in (dx, dy). Refinement runs
    // on the full system because G' diag(d) G is formed with rounding error
    // that grows with the spread of d.
    const Eigen::VectorXd w = s.cwiseQuotient(z);
    const auto reduced = [&](const Eigen::VectorXd& bx, const Eigen::VectorXd& by, const Eigen::VectorXd& bz,
                             Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz) {
      const auto eliminate = [&](const Eigen::VectorXd& ex, const Eigen::VectorXd& ey, const Eigen::VectorXd& ez,
                                 Eigen::VectorXd& cx, Eigen::VectorXd& cy, Eigen::VectorXd& cz) {
        kkt.solve(ex + G.transpose() * d.cwiseProduct(ez), ey, cx, cy);
        cz = d.cwiseProduct(G * cx - ez);
      };
      eliminate(bx, by, bz, dx, dy, dz);
      const double target = 1e-14 * std::max({1.0, bx.lpNorm<Eigen::Infinity>(), bz.lpNorm<Eigen::Infinity>()});
      for (int pass = 0; pass < 4; ++pass) {
        Eigen::VectorXd ex = bx - G.transpose() * dz;
        if (p > 0) ex -= E.transpose() * dy;
        const Eigen::VectorXd ey = p > 0 ? Eigen::VectorXd(by - E * dx) : Eigen::VectorXd(0);
        const Eigen::VectorXd ez = bz - G * dx + w.cwiseProduct(dz);
        const double err = std::max({ex.lpNorm<Eigen::Infinity>(), ey.size() ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                                     ez.lpNorm<Eigen::Infinity>()});
        if (err <= target) break;
        Eigen::VectorXd cx, cy, cz;
        eliminate(ex, ey, ez, cx, cy, cz);
        dx += cx;
        if (p > 0) dy += cy;
        dz += cz;
      }
    };
    Eigen::VectorXd x1, y1, z1;
    reduced(-c, f, h, x1, y1, z1);
    const double denom1 = c.dot(x1) + (p > 0 ? f.dot(y1) : 0.0) + h.dot(z1) - kappa / tau;

    struct Direction {
      Eigen::VectorXd dx, dy, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    const auto direction = [&](double sigma, const Eigen::VectorXd& ds_rhs, double dk_rhs) {
      Direction dir;
      const double scale = 1.0 - sigma;
      const Eigen::VectorXd dz_rhs = -scale * rz - ds_rhs.cwiseQuotient(z);
      Eigen::VectorXd x2, y2, z2;
      reduced(-scale * rx, p > 0 ? Eigen::VectorXd(-scale * ry) : Eigen::VectorXd(0), dz_rhs, x2, y2, z2);
      const double dt_rhs = -scale * rt - dk_rhs / tau;
      const double num2 = c.dot(x2) + (p > 0 ? f.dot(y2) : 0.0) + h.dot(z2);
      dir.dtau = (dt_rhs - num2) / denom1;
      dir.dx = x2 + dir.dtau * x1;
      dir.dy = p > 0 ? Eigen::VectorXd(y2 + dir.dtau * y1) : Eigen::VectorXd(0);
      dir.dz = z2 + dir.dtau * z1;
      dir.ds = (ds_rhs - s.cwiseProduct(dir.dz)).cwiseQuotient(z);
      dir.dkappa = (dk_rhs - kappa * dir.dtau) / tau;
      return dir;
    };
    const auto step_length = [&](const Direction& dir) {
      return std::min({detail::max_step(s, dir.ds), detail::max_step(z, dir.dz), detail::max_step(tau, dir.dtau),
                       detail::max_step(kappa, dir.dkappa)});
    };

    // Predictor.
    const Direction aff = direction(0.0, -s.cwiseProduct(z), -tau * kappa);
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);
    // Corrector with second-order term.
    const Eigen::VectorXd ds_rhs =
        (-s.cwiseProduct(z)).array() + sigma * mu - aff.ds.cwiseProduct(aff.dz).array();
    const double dk_rhs = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Direction dir = direction(sigma, ds_rhs, dk_rhs);
    const double alpha = std::min(1.0, 0.99 * step_length(dir));
    if (!(alpha > 0.0) || !std::isfinite(alpha)) break;

    x += alpha * dir.dx;
    if (p > 0) y += alpha * dir.dy;
    z += alpha * dir.dz;
    s += alpha * dir.ds;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
  }
  return finish(LpStatus::kNumericalFailure, best_x);
}

}  // namespace fosep
