#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fosep/errors.hpp"
#include "fosep/geometry.hpp"

namespace fosep {

/// Linearized contour error: eps(k) = -sin(theta) e_x + cos(theta) e_y, where
/// e = desired - actual. Positive when the actual point lies to the right of
/// the direction of travel (outside a counterclockwise circle).
inline std::vector<double> estimate_ce(std::span<const double> e_x, std::span<const double> e_y,
                                       std::span<const double> theta) {
  if (e_x.size() != e_y.size() || e_x.size() != theta.size()) {
    throw ArgumentError("estimate_ce: series lengths differ");
  }
  std::vector<double> out(e_x.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = -std::sin(theta[k]) * e_x[k] + std::cos(theta[k]) * e_y[k];
  return out;
}

/// Orthogonal distance to the path with the sign convention of estimate_ce.
inline std::vector<double> exact_ce(std::span<const Point2> actual, const Toolpath& path) {
  std::vector<double> out(actual.size());
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const NearestPoint np = path.nearest_point(actual[k]);
    const Point2 d = path.eval(np.s) - actual[k];
    const Point2 t = path.derivs(np.s, 1);
    const double side = (-t.y() * d.x() + t.x() * d.y());
    out[k] = side < 0.0 ? -np.distance : np.distance;
  }
  return out;
}

/// Both contour-error series in micrometres with their peak magnitudes.
struct ContourResult {
  std::vector<double> estimated_um;
  std::vector<double> exact_um;
  double max_estimated_um = 0.0;
  double max_exact_um = 0.0;
};

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Evaluates the estimate (tangent angles taken at the commanded s) and the
/// exact distance of the actual positions.
inline ContourResult contour_errors(const Toolpath& path, std::span<const double> s, std::span<const double> x_d,
                                    std::span<const double> y_d, std::span<const double> x,
                                    std::span<const double> y) {
  const std::size_t n = s.size();
  if (x_d.size() != n || y_d.size() != n || x.size() != n || y.size() != n) {
    throw ArgumentError("contour_errors: series lengths differ");
  }
  std::vector<double> ex(n), ey(n), theta(n);
  std::vector<Point2> actual(n);
  for (std::size_t k = 0; k < n; ++k) {
    ex[k] = x_d[k] - x[k];
    ey[k] = y_d[k] - y[k];
    theta[k] = path.tangent_angle(std::clamp(s[k], 0.0, 1.0));
    actual[k] = Point2(x[k], y[k]);
  }
  ContourResult r;
  r.estimated_um = estimate_ce(ex, ey, theta);
  r.exact_um = exact_ce(actual, path);
  for (double& v : r.estimated_um) v *= 1e3;
  for (double& v : r.exact_um) v *= 1e3;
  r.max_estimated_um = max_abs(r.estimated_um);
  r.max_exact_um = max_abs(r.exact_um);
  return r;
}

}  // namespace fosep
