#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fosep/trajgen.hpp"

using namespace fosep;

TEST(SevenSegment, CruiseWithConstantAccelerationPhase) {
  // F >= A^2 / J: each ramp lasts F/A + A/J.
  const KinematicLimits lim{50.0, 10.0, 5000.0};
  const double L = 100.0;
  const SevenSegmentProfile m(L, lim);
  const double F = 50.0, A = 1e4, J = 5e6;
  EXPECT_NEAR(m.duration(), L / F + F / A + A / J, 1e-12);
  EXPECT_NEAR(m.peak_speed(), F, 1e-12);
}

TEST(SevenSegment, CruiseWithJerkOnlyRamps) {
  // F < A^2 / J: ramps are two jerk phases of sqrt(F/J).
  const KinematicLimits lim{30.0, 0.5, 5.0};
  const double L = 10.0 * std::numbers::pi;
  const SevenSegmentProfile m(L, lim);
  EXPECT_NEAR(m.duration(), L / 30.0 + 2.0 * std::sqrt(30.0 / 5000.0), 1e-12);
}

TEST(SevenSegment, ShortMoveNeverReachesFeedrate) {
  const KinematicLimits lim{50.0, 10.0, 5000.0};
  const SevenSegmentProfile m(0.1, lim);
  EXPECT_LT(m.peak_speed(), 50.0);
  EXPECT_NEAR(m.at(m.duration()).position, 0.1, 1e-12);
  // Rest-to-rest symmetric profile: halfway in time is halfway in distance.
  EXPECT_NEAR(m.at(m.duration() / 2).position, 0.05, 1e-9);
}

TEST(SevenSegment, StateIsConsistentAndWithinLimits) {
  for (const KinematicLimits& lim : {KinematicLimits{30.0, 0.5, 5.0}, KinematicLimits{50.0, 10.0, 5000.0}}) {
    const double L = 31.4;
    const SevenSegmentProfile m(L, lim);
    const double h = 1e-6;
    for (int i = 1; i < 500; ++i) {
      const double t = m.duration() * i / 500.0;
      const auto st = m.at(t);
      EXPECT_LE(st.velocity, lim.feedrate_mm() * (1 + 1e-12));
      EXPECT_LE(std::abs(st.acceleration), lim.acceleration_mm() * (1 + 1e-12));
      EXPECT_LE(std::abs(st.jerk), lim.jerk_mm() * (1 + 1e-12));
      const double v_fd = (m.at(t + h).position - m.at(t - h).position) / (2 * h);
      EXPECT_NEAR(v_fd, st.velocity, 1e-5 * lim.feedrate_mm());
    }
    EXPECT_NEAR(m.at(m.duration()).position, L, 1e-10);
  }
}

TEST(Tap, SampledProfileEndsAtOneAndIsMonotone) {
  const auto p = tap_profile(31.4, {30.0, 0.5, 5.0}, 1e-3);
  EXPECT_EQ(p.s.front(), 0.0);
  EXPECT_EQ(p.s.back(), 1.0);
  EXPECT_EQ(p.size(), static_cast<std::size_t>(std::ceil(p.cycle_time / 1e-3 - 1e-9)) + 1);
  for (std::size_t k = 1; k < p.size(); ++k) EXPECT_GE(p.s[k], p.s[k - 1]);
}

TEST(Tap, CommandsRespectLimitsOnCircle) {
  const Toolpath c = Toolpath::circle({Point2(0, 0), 5.0, 0.0, 2.0 * std::numbers::pi});
  const KinematicLimits lim{30.0, 0.5, 5.0};
  auto p = tap_profile(c.length(), lim, 1e-3);
  fill_commands(p, c);
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_LE(p.feedrate[k], 30.0 * (1 + 1e-6));
    // Per-axis acceleration includes the centripetal term F^2/R = 0.18 m/s^2.
    EXPECT_LE(std::hypot(p.ax[k], p.ay[k]), std::hypot(0.5, 0.18) * 1.02);
  }
}

TEST(FillCommands, DifferencesOfStraightLineMotion) {
  // s = (k / n)^2 on a straight segment gives constant second differences.
  SplinePathSpec line;
  line.degree = 1;
  line.control_points = {Point2(0, 0), Point2(3, 4)};
  const Toolpath path = Toolpath::spline(line);
  TrajectoryProfile p;
  p.sample_time = 1e-3;
  const int n = 100;
  for (int k = 0; k <= n; ++k) p.s.push_back(std::pow(static_cast<double>(k) / n, 2));
  fill_commands(p, path);
  // position along the line: 5 (k/n)^2 mm; second difference 10/n^2 mm per Ts^2.
  const double acc_m = 10.0 / (n * n) / (1e-6) * 1e-3;
  for (int k = 3; k <= n; ++k) {
    EXPECT_NEAR(p.ax[static_cast<std::size_t>(k)], 0.6 * acc_m, 1e-6);
    EXPECT_NEAR(p.ay[static_cast<std::size_t>(k)], 0.8 * acc_m, 1e-6);
    EXPECT_NEAR(p.jx[static_cast<std::size_t>(k)], 0.0, 1e-3);
  }
  EXPECT_NEAR(p.feedrate[1], 5.0 / (n * n) / 1e-3, 1e-9);
}

TEST(Dwell, AppendsRestSamples) {
  const auto s = with_dwell({0.0, 0.5, 1.0}, 0.5);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s[3], 1.0);
  EXPECT_THROW(with_dwell({0.0, 1.0}, -0.1), ArgumentError);
}

TEST(Limits, Validation) {
  EXPECT_THROW((KinematicLimits{-1.0, 1.0, 1.0}.validate()), ArgumentError);
  EXPECT_THROW((KinematicLimits{1.0, 0.0, 1.0}.validate()), ArgumentError);
  EXPECT_THROW(tap_profile(1.0, {1.0, 1.0, 1.0}, 0.0), ArgumentError);
}
