#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <variant>
#include <vector>

#include "fosep/errors.hpp"
#include "fosep/splines.hpp"

namespace fosep {

using Point2 = Eigen::Vector2d;

struct CircleSpec {
  Point2 center{0.0, 0.0};
  double radius = 1.0;       // mm
  double start_angle = 0.0;  // rad
  double sweep = 2.0 * std::numbers::pi;  // rad, positive is counterclockwise
};

struct SplinePathSpec {
  int degree = 3;
  std::vector<Point2> control_points;  // mm
  std::vector<double> knots;           // empty: clamped uniform
};

struct NearestPoint {
  double s = 0.0;
  double distance = 0.0;  // mm
};

namespace detail {

// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGaussNodes{-0.9602898564975363, -0.7966664774136267,
                                                   -0.5255324099163290, -0.1834346424956498,
                                                   0.1834346424956498,  0.5255324099163290,
                                                   0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights{0.1012285362903763, 0.2223810344533745,
                                                     0.3137066458778873, 0.3626837833783620,
                                                     0.3626837833783620, 0.3137066458778873,
                                                     0.2223810344533745, 0.1012285362903763};

template <typename F>
double gauss8(const F& f, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < kGaussNodes.size(); ++i) sum += kGaussWeights[i] * f(mid + half * kGaussNodes[i]);
  return sum * half;
}

template <typename F>
double adaptive_gauss(const F& f, double a, double b, double whole, double rel_tol, double abs_tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gauss8(f, a, mid);
  const double right = gauss8(f, mid, b);
  const double both = left + right;
  if (depth <= 0 || std::abs(both - whole) <= std::max(rel_tol * std::abs(both), abs_tol)) return both;
  return adaptive_gauss(f, a, mid, left, rel_tol, 0.5 * abs_tol, depth - 1) +
         adaptive_gauss(f, mid, b, right, rel_tol, 0.5 * abs_tol, depth - 1);
}

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    slope_.assign(n, 0.0);
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    slope_[0] = delta[0];
    slope_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) {
        slope_[i] = 0.0;
      } else {
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        const double w1 = 2.0 * h1 + h0;
        const double w2 = h1 + 2.0 * h0;
        slope_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
  }

  double operator()(double t) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double u = (t - x_[i]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * y_[i] + h10 * h * slope_[i] + h01 * y_[i + 1] + h11 * h * slope_[i + 1];
  }

  std::size_t lower_node(double t) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

 private:
  std::vector<double> x_, y_, slope_;
};

}  // namespace detail

/// Planar toolpath parametrized by normalized arc length s in [0, 1].
/// Immutable after construction.
class Toolpath {
 public:
  static constexpr int kNearestSamples = 4096;
  static constexpr int kArcNodes = 2048;

  static Toolpath circle(const CircleSpec& spec) {
    if (!(spec.radius > 0.0) || !std::isfinite(spec.radius)) throw ArgumentError("circle: radius must be positive");
    if (!(std::abs(spec.sweep) > 0.0) || !std::isfinite(spec.sweep)) throw ArgumentError("circle: sweep must be nonzero");
    Toolpath path;
    path.shape_ = spec;
    path.length_ = std::abs(spec.sweep) * spec.radius;
    path.build_nearest_table();
    return path;
  }

  static Toolpath spline(const SplinePathSpec& spec) {
    const int count = static_cast<int>(spec.control_points.size());
    if (spec.degree < 1) throw ArgumentError("spline path: degree must be >= 1");
    if (count < spec.degree + 1) throw ArgumentError("spline path: too few control points for degree");
    auto data = std::make_shared<SplineData>(SplineData{
        spec.knots.empty() ? KnotVector::clamped_uniform(count, spec.degree) : KnotVector(spec.degree, spec.knots),
        spec.control_points, {}, {}, {}});
    if (data->knots.count() != count) throw ArgumentError("spline path: knot count does not match control points");
    if (std::all_of(spec.control_points.begin(), spec.control_points.end(),
                    [&](const Point2& c) { return c == spec.control_points.front(); })) {
      throw GeometryError("spline path: all control points coincide");
    }
    data->build_arc_table();
    Toolpath path;
    path.length_ = data->cumulative.back();
    if (!(path.length_ > 0.0)) throw GeometryError("spline path: zero length");
    path.shape_ = std::move(data);
    path.build_nearest_table();
    return path;
  }

  double length() const noexcept { return length_; }
  bool is_circle() const noexcept { return std::holds_alternative<CircleSpec>(shape_); }
  const CircleSpec* circle_spec() const noexcept { return std::get_if<CircleSpec>(&shape_); }

  Point2 eval(double s) const {
    check_s(s);
    return jet(s, 0)[0];
  }

  /// d^order (x, y) / ds^order for order 1..3.
  Point2 derivs(double s, int order) const {
    if (order < 1 || order > 3) throw ArgumentError("derivs: order must be 1..3");
    check_s(s);
    return jet(s, order)[static_cast<std::size_t>(order)];
  }

  /// Tangent angle atan2(y', x') in (-pi, pi].
  double tangent_angle(double s) const {
    const Point2 d = derivs(s, 1);
    if (d.norm() <= 1e-12 * std::max(1.0, length_)) throw GeometryError("tangent_angle: zero tangent");
    return std::atan2(d.y(), d.x());
  }

  /// Point and derivatives up to `order` (0..3) at s, no range check.
  std::array<Point2, 4> jet(double s, int order) const {
    std::array<Point2, 4> out{Point2::Zero(), Point2::Zero(), Point2::Zero(), Point2::Zero()};
    if (const auto* c = std::get_if<CircleSpec>(&shape_)) {
      const double phi = c->start_angle + c->sweep * s;
      const double w = c->sweep;
      const double cs = std::cos(phi);
      const double sn = std::sin(phi);
      const double r = c->radius;
      out[0] = c->center + r * Point2(cs, sn);
      if (order >= 1) out[1] = r * w * Point2(-sn, cs);
      if (order >= 2) out[2] = r * w * w * Point2(-cs, -sn);
      if (order >= 3) out[3] = r * w * w * w * Point2(sn, -cs);
      return out;
    }
    const auto& sp = *std::get<std::shared_ptr<SplineData>>(shape_);
    const double u = sp.parameter_at(s * length_);
    const CurveJet cj = curve_jet(sp.knots, sp.control, u);
    out[0] = cj.d[0];
    if (order == 0) return out;
    const Point2& c1 = cj.d[1];
    const Point2& c2 = cj.d[2];
    const Point2& c3 = cj.d[3];
    const double speed = c1.norm();
    if (speed <= 0.0) throw GeometryError("spline path: zero parametric speed");
    const double L = length_;
    // u(s) with du/ds = L / |c'(u)|.
    const double u1 = L / speed;
    const double dot12 = c1.dot(c2);
    const double u2 = -L * L * dot12 / std::pow(speed, 4);
    const double u3 = -L * L * u1 *
                      ((c2.squaredNorm() + c1.dot(c3)) / std::pow(speed, 4) - 4.0 * dot12 * dot12 / std::pow(speed, 6));
    out[1] = c1 * u1;
    if (order >= 2) out[2] = c2 * u1 * u1 + c1 * u2;
    if (order >= 3) out[3] = c3 * u1 * u1 * u1 + 3.0 * c2 * u1 * u2 + c1 * u3;
    return out;
  }

  /// Closest point on the path: dense sampling then golden-section refinement.
  /// Ties resolve to the smallest s.
  NearestPoint nearest_point(const Point2& p) const {
    const auto& table = *nearest_table_;
    const int count = static_cast<int>(table.size());
    int best = 0;
    double best_d2 = (table[0] - p).squaredNorm();
    for (int i = 1; i < count; ++i) {
      const double d2 = (table[static_cast<std::size_t>(i)] - p).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    const double step = 1.0 / (count - 1);
    const double s_best = best * step;
    double lo = std::max(0.0, s_best - step);
    double hi = std::min(1.0, s_best + step);
    const auto dist2 = [&](double s) { return (jet(s, 0)[0] - p).squaredNorm(); };
    constexpr double kInvPhi = 0.6180339887498949;
    double a = hi - kInvPhi * (hi - lo);
    double b = lo + kInvPhi * (hi - lo);
    double fa = dist2(a);
    double fb = dist2(b);
    while (hi - lo > 1e-13) {
      if (fa <= fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - kInvPhi * (hi - lo);
        fa = dist2(a);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + kInvPhi * (hi - lo);
        fb = dist2(b);
      }
    }
    const double s_ref = 0.5 * (lo + hi);
    const double d_ref = std::sqrt(dist2(s_ref));
    const double d_best = std::sqrt(best_d2);
    // Keep the sampled point unless refinement strictly improves on it.
    if (d_ref < d_best - 1e-12) return {s_ref, d_ref};
    return {s_best, d_best};
  }

 private:
  struct SplineData {
    KnotVector knots;
    std::vector<Point2> control;
    std::vector<double> node_u;
    std::vector<double> cumulative;  // arc length at node_u
    detail::MonotoneCubic inverse;   // arc length -> u

    double speed(double u) const { return curve_jet(knots, control, u).d[1].norm(); }

    void build_arc_table() {
      const int spans = kArcNodes - 1;
      node_u.resize(kArcNodes);
      cumulative.assign(kArcNodes, 0.0);
      const auto f = [this](double u) { return speed(u); };
      // Roundoff floor: a degenerate (zero-speed) curve must not recurse to full depth.
      double scale = 1.0;
      for (const auto& c : control) scale = std::max(scale, c.cwiseAbs().maxCoeff());
      const double floor = 1e-14 * scale / spans;
      for (int i = 0; i < kArcNodes; ++i) node_u[static_cast<std::size_t>(i)] = static_cast<double>(i) / spans;
      node_u.back() = 1.0;
      for (int i = 1; i < kArcNodes; ++i) {
        const double a = node_u[static_cast<std::size_t>(i - 1)];
        const double b = node_u[static_cast<std::size_t>(i)];
        const double piece = detail::adaptive_gauss(f, a, b, detail::gauss8(f, a, b), 1e-9, floor, 20);
        cumulative[static_cast<std::size_t>(i)] = cumulative[static_cast<std::size_t>(i - 1)] + piece;
      }
      for (int i = 1; i < kArcNodes; ++i) {
        if (!(cumulative[static_cast<std::size_t>(i)] > cumulative[static_cast<std::size_t>(i - 1)])) {
          throw GeometryError("spline path: arc length is not strictly increasing (zero-speed segment)");
        }
      }
      inverse = detail::MonotoneCubic(cumulative, node_u);
    }

    // Monotone-cubic guess refined by Newton steps on the exact arc length.
    double parameter_at(double arc) const {
      if (arc <= 0.0) return 0.0;
      if (arc >= cumulative.back()) return 1.0;
      double u = inverse(arc);
      const std::size_t node = inverse.lower_node(arc);
      const double u0 = node_u[node];
      const double a0 = cumulative[node];
      const auto f = [this](double t) { return speed(t); };
      for (int it = 0; it < 3; ++it) {
        const double a = a0 + detail::gauss8(f, u0, u);
        const double v = speed(u);
        if (v <= 0.0) break;
        const double next = std::clamp(u - (a - arc) / v, node_u[node], node_u[node + 1]);
        if (std::abs(next - u) < 1e-15) {
          u = next;
          break;
        }
        u = next;
      }
      return u;
    }
  };

  Toolpath() = default;

  static void check_s(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("toolpath: s outside [0, 1]");
  }

  void build_nearest_table() {
    auto table = std::make_shared<std::vector<Point2>>(kNearestSamples + 1);
    for (int i = 0; i <= kNearestSamples; ++i) {
      (*table)[static_cast<std::size_t>(i)] = jet(static_cast<double>(i) / kNearestSamples, 0)[0];
    }
    nearest_table_ = std::move(table);
  }

  std::variant<CircleSpec, std::shared_ptr<SplineData>> shape_;
  double length_ = 0.0;
  std::shared_ptr<const std::vector<Point2>> nearest_table_;
};

}  // namespace fosep
