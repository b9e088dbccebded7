#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fosep/errors.hpp"

namespace fosep {

/// Row k holds N_{j,m}(zeta_k) for every basis function j.
using BasisMatrix = Eigen::MatrixXd;

enum class KnotStyle { kClamped, kUniform };

/// Nondecreasing knot sequence g_0..g_{n+m} in [0, 1] for n basis functions of
/// degree m.
class KnotVector {
 public:
  KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
    if (degree_ < 0) throw ArgumentError("knot vector: negative degree");
    if (knots_.size() < static_cast<std::size_t>(2 * degree_ + 2)) {
      throw ArgumentError("knot vector: need at least 2*(degree+1) knots");
    }
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (knots_[i] < knots_[i - 1]) throw ArgumentError("knot vector: knots must be nondecreasing");
    }
    if (knots_.front() != 0.0 || knots_.back() != 1.0) {
      throw ArgumentError("knot vector: first and last knots must be 0 and 1");
    }
  }

  /// End knots repeated degree+1 times, interior knots equally spaced.
  static KnotVector clamped_uniform(int count, int degree) {
    if (degree < 0 || count < degree + 1) {
      throw ArgumentError("clamped knot vector: need count >= degree + 1 >= 1");
    }
    std::vector<double> g(static_cast<std::size_t>(count + degree + 1));
    const int interior_spans = count - degree;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const int k = static_cast<int>(i) - degree;
      g[i] = std::clamp(static_cast<double>(k) / interior_spans, 0.0, 1.0);
    }
    g.front() = 0.0;
    g.back() = 1.0;
    return KnotVector(degree, std::move(g));
  }

  /// Strictly uniform knots g_i = i / (n + m). Partition of unity only holds
  /// on [g_m, g_n].
  static KnotVector uniform(int count, int degree) {
    if (degree < 0 || count < degree + 1) {
      throw ArgumentError("uniform knot vector: need count >= degree + 1 >= 1");
    }
    const int last = count + degree;
    std::vector<double> g(static_cast<std::size_t>(last + 1));
    for (int i = 0; i <= last; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / last;
    return KnotVector(degree, std::move(g));
  }

  static KnotVector make(KnotStyle style, int count, int degree) {
    return style == KnotStyle::kClamped ? clamped_uniform(count, degree) : uniform(count, degree);
  }

  int degree() const noexcept { return degree_; }
  /// Number of basis functions n.
  int count() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  double operator[](int i) const { return knots_[static_cast<std::size_t>(i)]; }

 private:
  int degree_;
  std::vector<double> knots_;
};

namespace detail {

inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline bool in_zero_degree_support(const std::vector<double>& g, int j, double zeta) {
  const double lo = g[static_cast<std::size_t>(j)];
  const double hi = g[static_cast<std::size_t>(j) + 1];
  if (lo == hi) return false;
  if (zeta >= lo && zeta < hi) return true;
  // The right end of the parameter range belongs to the last nonempty span.
  return zeta == g.back() && hi == g.back();
}

inline double cox_de_boor(const std::vector<double>& g, int j, int m, double zeta) {
  if (m == 0) return in_zero_degree_support(g, j, zeta) ? 1.0 : 0.0;
  const auto at = [&](int i) { return g[static_cast<std::size_t>(i)]; };
  const double left = safe_ratio(zeta - at(j), at(j + m) - at(j));
  const double right = safe_ratio(at(j + m + 1) - zeta, at(j + m + 1) - at(j + 1));
  double value = 0.0;
  if (left != 0.0) value += left * cox_de_boor(g, j, m - 1, zeta);
  if (right != 0.0) value += right * cox_de_boor(g, j + 1, m - 1, zeta);
  return value;
}

}  // namespace detail

/// Basis function N_{j,m}(zeta) by the Cox-de Boor recursion; 0/0 terms are 0.
/// Degree-0 functions use half-open spans [g_j, g_{j+1}) except at zeta = 1.
inline double basis_value(const KnotVector& knots, int j, int m, double zeta) {
  const int last_index = static_cast<int>(knots.knots().size()) - m - 2;
  if (m < 0 || m > knots.degree()) throw ArgumentError("basis_value: degree out of range");
  if (j < 0 || j > last_index) throw ArgumentError("basis_value: basis index out of range");
  if (zeta < 0.0 || zeta > 1.0) throw DomainError("basis_value: zeta outside [0, 1]");
  return detail::cox_de_boor(knots.knots(), j, m, zeta);
}

inline double basis_value(const KnotVector& knots, int j, double zeta) {
  return basis_value(knots, j, knots.degree(), zeta);
}

/// Knot span index i with g_i <= zeta < g_{i+1}, restricted to [m, n-1].
/// Returns -1 when zeta lies outside [g_m, g_n] (possible for unclamped knots).
inline int find_span(const KnotVector& knots, double zeta) {
  const int m = knots.degree();
  const int n = knots.count();
  if (zeta < knots[m] || zeta > knots[n]) return -1;
  if (zeta >= knots[n]) {
    int i = n - 1;
    while (i > m && knots[i] == knots[n]) --i;
    return i;
  }
  const auto& g = knots.knots();
  const auto it = std::upper_bound(g.begin() + m, g.begin() + n + 1, zeta);
  return static_cast<int>(it - g.begin()) - 1;
}

/// Nonzero basis functions and their derivatives at zeta on `span`:
/// result(k, r) = d^k N_{span-m+r, m} / dzeta^k.
inline Eigen::MatrixXd basis_derivatives_on_span(const KnotVector& knots, int span, double zeta,
                                                  int order) {
  const int m = knots.degree();
  const auto g = [&](int i) { return knots[i]; };
  Eigen::MatrixXd ndu(m + 1, m + 1);
  std::vector<double> left(static_cast<std::size_t>(m + 1)), right(static_cast<std::size_t>(m + 1));
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= m; ++j) {
    left[j] = zeta - g(span + 1 - j);
    right[j] = g(span + j) - zeta;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = detail::safe_ratio(ndu(r, j - 1), ndu(j, r));
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }
  Eigen::MatrixXd ders = Eigen::MatrixXd::Zero(order + 1, m + 1);
  for (int j = 0; j <= m; ++j) ders(0, j) = ndu(j, m);
  Eigen::MatrixXd a(2, m + 1);
  for (int r = 0; r <= m; ++r) {
    int s1 = 0;
    int s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= std::min(order, m); ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = m - k;
      if (r >= k) {
        a(s2, 0) = detail::safe_ratio(a(s1, 0), ndu(pk + 1, rk));
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : m - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = detail::safe_ratio(a(s1, j) - a(s1, j - 1), ndu(pk + 1, rk + j));
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = detail::safe_ratio(-a(s1, k - 1), ndu(pk + 1, r));
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = m;
  for (int k = 1; k <= std::min(order, m); ++k) {
    ders.row(k) *= factor;
    factor *= (m - k);
  }
  return ders;
}

/// Uniform grid zeta_k = k / (rows - 1).
inline std::vector<double> uniform_grid(int rows) {
  if (rows < 1) throw ArgumentError("uniform_grid: need at least one sample");
  std::vector<double> z(static_cast<std::size_t>(rows));
  for (int k = 0; k < rows; ++k) z[static_cast<std::size_t>(k)] = rows == 1 ? 0.0 : static_cast<double>(k) / (rows - 1);
  z.back() = 1.0;
  return z;
}

namespace detail {

// Finite-difference-free derivative of N_{j,m} for points outside [g_m, g_n],
// via the standard derivative recursion over lower-degree functions.
inline double basis_derivative_recursive(const std::vector<double>& g, int j, int m, int order,
                                         double zeta) {
  if (order == 0) return cox_de_boor(g, j, m, zeta);
  if (m == 0) return 0.0;
  const auto at = [&](int i) { return g[static_cast<std::size_t>(i)]; };
  return m * (safe_ratio(1.0, at(j + m) - at(j)) * basis_derivative_recursive(g, j, m - 1, order - 1, zeta) -
              safe_ratio(1.0, at(j + m + 1) - at(j + 1)) *
                  basis_derivative_recursive(g, j + 1, m - 1, order - 1, zeta));
}

inline BasisMatrix sampled_basis(const KnotVector& knots, const std::vector<double>& zeta, int order) {
  const int n = knots.count();
  const int m = knots.degree();
  BasisMatrix out = BasisMatrix::Zero(static_cast<Eigen::Index>(zeta.size()), n);
  for (std::size_t k = 0; k < zeta.size(); ++k) {
    const int span = find_span(knots, zeta[k]);
    if (span < 0) {
      for (int j = 0; j < n; ++j) {
        out(static_cast<Eigen::Index>(k), j) = basis_derivative_recursive(knots.knots(), j, m, order, zeta[k]);
      }
      continue;
    }
    const Eigen::MatrixXd d = basis_derivatives_on_span(knots, span, zeta[k], order);
    for (int r = 0; r <= m; ++r) out(static_cast<Eigen::Index>(k), span - m + r) = d(order, r);
  }
  return out;
}

}  // namespace detail

/// Basis matrix on the uniform grid of `rows` samples.
inline BasisMatrix basis_matrix(const KnotVector& knots, int rows) {
  if (rows < knots.count()) {
    throw RankDeficiencyError("basis_matrix: " + std::to_string(rows) + " samples for " +
                              std::to_string(knots.count()) + " basis functions");
  }
  return detail::sampled_basis(knots, uniform_grid(rows), 0);
}

/// Analytic d^order/dzeta^order of every basis function on the uniform grid.
inline BasisMatrix derivative_basis_matrix(const KnotVector& knots, int order, int rows) {
  if (order < 1 || order > 3) throw ArgumentError("derivative_basis_matrix: order must be 1..3");
  if (order > knots.degree()) throw ArgumentError("derivative_basis_matrix: order exceeds degree");
  if (rows < knots.count()) {
    throw RankDeficiencyError("derivative_basis_matrix: fewer samples than basis functions");
  }
  return detail::sampled_basis(knots, uniform_grid(rows), order);
}

/// Basis (or derivative) matrix at arbitrary parameter values in [0, 1].
inline BasisMatrix basis_matrix_at(const KnotVector& knots, const std::vector<double>& zeta, int order = 0) {
  if (order < 0 || order > knots.degree()) throw ArgumentError("basis_matrix_at: bad derivative order");
  for (double z : zeta) {
    if (z < 0.0 || z > 1.0) throw DomainError("basis_matrix_at: zeta outside [0, 1]");
  }
  return detail::sampled_basis(knots, zeta, order);
}

/// Value and first three derivatives of a planar B-spline curve at u.
struct CurveJet {
  std::array<Eigen::Vector2d, 4> d;
};

inline CurveJet curve_jet(const KnotVector& knots, const std::vector<Eigen::Vector2d>& control, double u) {
  if (static_cast<int>(control.size()) != knots.count()) {
    throw ArgumentError("curve_jet: control point count does not match knot vector");
  }
  const int m = knots.degree();
  const int span = find_span(knots, u);
  if (span < 0) throw DomainError("curve_jet: parameter outside the curve domain");
  const Eigen::MatrixXd ders = basis_derivatives_on_span(knots, span, u, 3);
  CurveJet jet;
  for (int k = 0; k <= 3; ++k) {
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    if (k <= m) {
      for (int r = 0; r <= m; ++r) acc += ders(k, r) * control[static_cast<std::size_t>(span - m + r)];
    }
    jet.d[static_cast<std::size_t>(k)] = acc;
  }
  return jet;
}

}  // namespace fosep
