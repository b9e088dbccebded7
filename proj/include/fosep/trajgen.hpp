#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "fosep/errors.hpp"
#include "fosep/geometry.hpp"

namespace fosep {

/// Feedrate in mm/s, acceleration in m/s^2, jerk in m/s^3 (the units machine
/// builders quote). Use the *_mm accessors inside computations.
struct KinematicLimits {
  double feedrate = 0.0;
  double acceleration = 0.0;
  double jerk = 0.0;

  double feedrate_mm() const noexcept { return feedrate; }
  double acceleration_mm() const noexcept { return acceleration * 1e3; }
  double jerk_mm() const noexcept { return jerk * 1e3; }

  void validate() const {
    const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(feedrate) || !ok(acceleration) || !ok(jerk)) {
      throw ArgumentError("kinematic limits must be finite and strictly positive");
    }
  }
};

/// Sampled motion along a toolpath. Positions in mm; feedrate in mm/s; axis
/// acceleration in m/s^2 and jerk in m/s^3, from backward differences with
/// rest padding before the first sample.
struct TrajectoryProfile {
  double sample_time = 1e-3;
  std::vector<double> s;
  std::vector<double> x_d, y_d;
  std::vector<double> feedrate;
  std::vector<double> ax, ay;
  std::vector<double> jx, jy;
  double cycle_time = 0.0;

  std::size_t size() const noexcept { return s.size(); }
};

/// Jerk-limited seven-segment rest-to-rest motion over a distance.
class SevenSegmentProfile {
 public:
  SevenSegmentProfile(double distance, const KinematicLimits& limits) : distance_(distance) {
    if (!(distance > 0.0) || !std::isfinite(distance)) throw ArgumentError("tap: distance must be positive");
    limits.validate();
    const double F = limits.feedrate_mm();
    const double A = limits.acceleration_mm();
    const double J = limits.jerk_mm();
    double v = F;
    if (2.0 * ramp_distance(F, A, J) > distance) {
      // No cruise: the peak speed is set by the distance.
      if (distance / 2.0 >= A * A * A / (J * J)) {
        const double b = A * A / J;
        v = 0.5 * (-b + std::sqrt(b * b + 4.0 * A * distance));
      } else {
        v = std::pow(0.5 * distance * std::sqrt(J), 2.0 / 3.0);
      }
    }
    double t_jerk = 0.0;
    double t_const = 0.0;
    if (v >= A * A / J) {
      t_jerk = A / J;
      t_const = v / A - A / J;
    } else {
      t_jerk = std::sqrt(v / J);
    }
    const double cruise = std::max(0.0, (distance - 2.0 * ramp_distance(v, A, J)) / v);
    segments_ = {{{J, t_jerk}, {0.0, t_const}, {-J, t_jerk}, {0.0, cruise}, {-J, t_jerk}, {0.0, t_const}, {J, t_jerk}}};
    peak_speed_ = v;
    duration_ = 0.0;
    for (const auto& seg : segments_) duration_ += seg.duration;
  }

  double duration() const noexcept { return duration_; }
  double peak_speed() const noexcept { return peak_speed_; }

  struct State {
    double position = 0.0, velocity = 0.0, acceleration = 0.0, jerk = 0.0;
  };

  State at(double t) const {
    State st;
    double remaining = std::clamp(t, 0.0, duration_);
    for (const auto& seg : segments_) {
      const double d = std::min(remaining, seg.duration);
      st.position += st.velocity * d + st.acceleration * d * d / 2.0 + seg.jerk * d * d * d / 6.0;
      st.velocity += st.acceleration * d + seg.jerk * d * d / 2.0;
      st.acceleration += seg.jerk * d;
      st.jerk = seg.jerk;
      remaining -= d;
      if (remaining <= 0.0) break;
    }
    if (t >= duration_) {
      st = State{distance_, 0.0, 0.0, 0.0};
    }
    return st;
  }

 private:
  struct Segment {
    double jerk;
    double duration;
  };

  // Distance covered while accelerating from rest to speed v.
  static double ramp_distance(double v, double A, double J) {
    const double t = v >= A * A / J ? v / A + A / J : 2.0 * std::sqrt(v / J);
    return v * t / 2.0;
  }

  double distance_;
  std::array<Segment, 7> segments_{};
  double peak_speed_ = 0.0;
  double duration_ = 0.0;
};

/// TAP trajectory: s(k) = distance(k T_s) / L, last sample exactly 1.
inline TrajectoryProfile tap_profile(double length, const KinematicLimits& limits, double sample_time) {
  if (!(sample_time > 0.0)) throw ArgumentError("tap: sample time must be positive");
  const SevenSegmentProfile motion(length, limits);
  const auto steps = static_cast<std::size_t>(std::ceil(motion.duration() / sample_time - 1e-9));
  TrajectoryProfile out;
  out.sample_time = sample_time;
  out.s.resize(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    out.s[k] = std::clamp(motion.at(static_cast<double>(k) * sample_time).position / length, 0.0, 1.0);
  }
  out.s.back() = 1.0;
  out.cycle_time = motion.duration();
  return out;
}

/// Appends a dwell at s = 1 of ceil(fraction * size) samples.
inline std::vector<double> with_dwell(std::vector<double> s, double fraction) {
  if (fraction < 0.0) throw ArgumentError("dwell fraction must be nonnegative");
  const auto extra = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(s.size())));
  s.insert(s.end(), extra, 1.0);
  return s;
}

/// Fills x_d, y_d and the difference-based kinematics from s.
inline void fill_commands(TrajectoryProfile& profile, const Toolpath& path) {
  const std::size_t n = profile.s.size();
  profile.x_d.resize(n);
  profile.y_d.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point2 p = path.eval(std::clamp(profile.s[k], 0.0, 1.0));
    profile.x_d[k] = p.x();
    profile.y_d[k] = p.y();
  }
  const double ts = profile.sample_time;
  profile.feedrate.assign(n, 0.0);
  profile.ax.assign(n, 0.0);
  profile.ay.assign(n, 0.0);
  profile.jx.assign(n, 0.0);
  profile.jy.assign(n, 0.0);
  const auto at = [n](const std::vector<double>& v, std::ptrdiff_t k) {
    return v[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n) - 1))];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i);
    const double dx = at(profile.x_d, k) - at(profile.x_d, k - 1);
    const double dy = at(profile.y_d, k) - at(profile.y_d, k - 1);
    profile.feedrate[i] = std::hypot(dx, dy) / ts;
    const auto d2 = [&](const std::vector<double>& v) { return at(v, k) - 2.0 * at(v, k - 1) + at(v, k - 2); };
    const auto d3 = [&](const std::vector<double>& v) {
      return at(v, k) - 3.0 * at(v, k - 1) + 3.0 * at(v, k - 2) - at(v, k - 3);
    };
    profile.ax[i] = d2(profile.x_d) / (ts * ts) * 1e-3;
    profile.ay[i] = d2(profile.y_d) / (ts * ts) * 1e-3;
    profile.jx[i] = d3(profile.x_d) / (ts * ts * ts) * 1e-3;
    profile.jy[i] = d3(profile.y_d) / (ts * ts * ts) * 1e-3;
  }
}

}  // namespace fosep
