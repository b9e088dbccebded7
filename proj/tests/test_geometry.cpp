#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fosep/geometry.hpp"

using namespace fosep;

namespace {

Toolpath unit_test_circle() { return Toolpath::circle({Point2(1.0, -2.0), 5.0, 0.3, 2.0 * std::numbers::pi}); }

Toolpath wavy_spline() {
  SplinePathSpec spec;
  spec.degree = 3;
  spec.control_points = {Point2(0, 0), Point2(4, 3), Point2(8, -2), Point2(12, 4), Point2(16, 0), Point2(20, 2)};
  return Toolpath::spline(spec);
}

double polyline_length(const Toolpath& p, int pieces) {
  double total = 0.0;
  Point2 prev = p.eval(0.0);
  for (int i = 1; i <= pieces; ++i) {
    const Point2 cur = p.eval(static_cast<double>(i) / pieces);
    total += (cur - prev).norm();
    prev = cur;
  }
  return total;
}

}  // namespace

TEST(Circle, LengthAndPoints) {
  const Toolpath c = unit_test_circle();
  EXPECT_NEAR(c.length(), 10.0 * std::numbers::pi, 1e-12);
  for (double s : {0.0, 0.125, 0.5, 0.9}) {
    const double phi = 0.3 + 2.0 * std::numbers::pi * s;
    EXPECT_NEAR(c.eval(s).x(), 1.0 + 5.0 * std::cos(phi), 1e-12);
    EXPECT_NEAR(c.eval(s).y(), -2.0 + 5.0 * std::sin(phi), 1e-12);
  }
}

TEST(Circle, SpeedInNormalizedArcLengthEqualsLength) {
  const Toolpath c = unit_test_circle();
  for (double s : {0.0, 0.3, 0.77, 1.0}) EXPECT_NEAR(c.derivs(s, 1).norm(), c.length(), 1e-10);
}

TEST(Toolpath, DerivativesMatchFiniteDifferences) {
  for (const Toolpath& p : {unit_test_circle(), wavy_spline()}) {
    const double h = 1e-5;
    for (double s : {0.11, 0.37, 0.52, 0.81}) {
      for (int order = 1; order <= 3; ++order) {
        const Point2 lower = order == 1 ? p.eval(s - h) : p.derivs(s - h, order - 1);
        const Point2 upper = order == 1 ? p.eval(s + h) : p.derivs(s + h, order - 1);
        const Point2 fd = (upper - lower) / (2.0 * h);
        const Point2 d = p.derivs(s, order);
        EXPECT_LE((fd - d).norm(), 1e-5 * std::max(1.0, d.norm())) << "s=" << s << " order=" << order;
      }
    }
  }
}

TEST(Spline, ArcLengthParameterizationIsUniform) {
  const Toolpath p = wavy_spline();
  EXPECT_NEAR(p.length(), polyline_length(p, 20000), 1e-6 * p.length());
  // |d/ds (x, y)| equals the total length everywhere when s is normalized arc length.
  for (int i = 0; i <= 50; ++i) EXPECT_NEAR(p.derivs(i / 50.0, 1).norm(), p.length(), 1e-6 * p.length());
}

TEST(Spline, EndpointsAreClampedControlPoints) {
  const Toolpath p = wavy_spline();
  EXPECT_LE((p.eval(0.0) - Point2(0, 0)).norm(), 1e-12);
  EXPECT_LE((p.eval(1.0) - Point2(20, 2)).norm(), 1e-9);
}

TEST(Toolpath, TangentAngleOfCircle) {
  const Toolpath c = Toolpath::circle({Point2(0, 0), 5.0, 0.0, 2.0 * std::numbers::pi});
  EXPECT_NEAR(c.tangent_angle(0.0), std::numbers::pi / 2, 1e-12);
  EXPECT_NEAR(c.tangent_angle(0.25), std::numbers::pi, 1e-12);
}

TEST(Toolpath, NearestPointOnCircle) {
  const Toolpath c = unit_test_circle();
  for (double ang : {0.4, 1.9, 3.5, 5.8}) {
    for (double r : {4.9, 5.0, 5.03, 7.0}) {
      const Point2 q = Point2(1.0, -2.0) + r * Point2(std::cos(ang), std::sin(ang));
      const NearestPoint np = c.nearest_point(q);
      EXPECT_NEAR(np.distance, std::abs(r - 5.0), 1e-9);
      EXPECT_NEAR((c.eval(np.s) - q).norm(), np.distance, 1e-9);
    }
  }
}

TEST(Toolpath, RejectsBadInput) {
  EXPECT_THROW(Toolpath::circle({Point2(0, 0), -1.0, 0.0, 1.0}), ArgumentError);
  EXPECT_THROW(Toolpath::circle({Point2(0, 0), 1.0, 0.0, 0.0}), ArgumentError);
  EXPECT_THROW(unit_test_circle().eval(1.2), DomainError);
  SplinePathSpec degenerate;
  degenerate.degree = 2;
  degenerate.control_points = {Point2(1, 1), Point2(1, 1), Point2(1, 1)};
  EXPECT_THROW(Toolpath::spline(degenerate), GeometryError);
}
