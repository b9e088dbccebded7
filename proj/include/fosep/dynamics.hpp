#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "fosep/errors.hpp"

namespace fosep {

/// Rational discrete-time model num(z)/den(z), coefficients in descending
/// powers of z. The denominator is stored monic.
class DiscreteTransferFunction {
 public:
  DiscreteTransferFunction(std::vector<double> num, std::vector<double> den, double sample_time)
      : num_(std::move(num)), den_(std::move(den)), sample_time_(sample_time) {
    trim_leading_zeros(num_);
    trim_leading_zeros(den_);
    if (den_.empty()) throw ArgumentError("transfer function: zero denominator");
    if (num_.empty()) num_ = {0.0};
    if (num_.size() > den_.size()) throw ArgumentError("transfer function: improper (deg num > deg den)");
    if (!(sample_time_ > 0.0)) throw ArgumentError("transfer function: sample time must be positive");
    for (double v : num_) {
      if (!std::isfinite(v)) throw ArgumentError("transfer function: non-finite numerator coefficient");
    }
    for (double v : den_) {
      if (!std::isfinite(v)) throw ArgumentError("transfer function: non-finite denominator coefficient");
    }
    const double lead = den_.front();
    for (double& v : num_) v /= lead;
    for (double& v : den_) v /= lead;
  }

  static DiscreteTransferFunction identity(double sample_time) { return {{1.0}, {1.0}, sample_time}; }
  static DiscreteTransferFunction delay(int samples, double sample_time) {
    std::vector<double> den(static_cast<std::size_t>(samples) + 1, 0.0);
    den.front() = 1.0;
    return {{1.0}, den, sample_time};
  }

  const std::vector<double>& numerator() const noexcept { return num_; }
  const std::vector<double>& denominator() const noexcept { return den_; }
  double sample_time() const noexcept { return sample_time_; }
  int order() const noexcept { return static_cast<int>(den_.size()) - 1; }

  /// Numerator padded to the denominator length, i.e. coefficients of z^-i.
  std::vector<double> padded_numerator() const {
    std::vector<double> b(den_.size(), 0.0);
    std::copy(num_.begin(), num_.end(), b.end() - static_cast<std::ptrdiff_t>(num_.size()));
    return b;
  }

 private:
  static void trim_leading_zeros(std::vector<double>& p) {
    const auto first = std::find_if(p.begin(), p.end(), [](double v) { return v != 0.0; });
    p.erase(p.begin(), first);
  }

  std::vector<double> num_;
  std::vector<double> den_;
  double sample_time_;
};

/// Zero-initial-condition response of the difference equation.
inline std::vector<double> simulate(const DiscreteTransferFunction& tf, std::span<const double> input) {
  const std::vector<double> b = tf.padded_numerator();
  const std::vector<double>& a = tf.denominator();
  const std::size_t order = a.size() - 1;
  std::vector<double> y(input.size(), 0.0);
  for (std::size_t k = 0; k < input.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i <= order && i <= k; ++i) acc += b[i] * input[k - i];
    for (std::size_t i = 1; i <= order && i <= k; ++i) acc -= a[i] * y[k - i];
    y[k] = acc;
  }
  return y;
}

inline Eigen::VectorXd simulate(const DiscreteTransferFunction& tf, const Eigen::VectorXd& input) {
  const std::vector<double> y = simulate(tf, std::span<const double>(input.data(), static_cast<std::size_t>(input.size())));
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

/// Roots of the denominator (companion-matrix eigenvalues).
inline std::vector<std::complex<double>> poles(const DiscreteTransferFunction& tf) {
  const auto& a = tf.denominator();
  const int n = static_cast<int>(a.size()) - 1;
  if (n == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) companion(0, j) = -a[static_cast<std::size_t>(j) + 1];
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<std::complex<double>> out;
  for (int i = 0; i < n; ++i) out.push_back(solver.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](auto l, auto r) {
    return std::abs(l) != std::abs(r) ? std::abs(l) > std::abs(r) : l.real() > r.real();
  });
  return out;
}

inline double spectral_radius(const DiscreteTransferFunction& tf) {
  double r = 0.0;
  for (const auto& p : poles(tf)) r = std::max(r, std::abs(p));
  return r;
}

inline bool is_stable(const DiscreteTransferFunction& tf, double margin = 1e-9) {
  return spectral_radius(tf) <= 1.0 + margin;
}

struct ImpulseResponse {
  std::vector<double> h;
  bool unstable = false;  // warning only: the response may grow
};

inline ImpulseResponse impulse_response(const DiscreteTransferFunction& tf, int count) {
  if (count < 1) throw ArgumentError("impulse_response: need at least one sample");
  std::vector<double> pulse(static_cast<std::size_t>(count), 0.0);
  pulse[0] = 1.0;
  return {simulate(tf, pulse), !is_stable(tf)};
}

/// num(1) / den(1).
inline double dc_gain(const DiscreteTransferFunction& tf) {
  double num = 0.0;
  double den = 0.0;
  for (double v : tf.numerator()) num += v;
  for (double v : tf.denominator()) den += v;
  if (std::abs(den) <= 1e-12) throw NumericalError("dc_gain: den(1) is zero (ill-conditioned DC gain)");
  return num / den;
}

/// Numerator rescaled so that dc_gain is exactly 1.
inline DiscreteTransferFunction normalize_dc(const DiscreteTransferFunction& tf) {
  const double gain = dc_gain(tf);
  if (std::abs(gain) <= 1e-300) throw NumericalError("normalize_dc: zero DC gain");
  std::vector<double> num = tf.numerator();
  for (double& v : num) v /= gain;
  return {num, tf.denominator(), tf.sample_time()};
}

/// Reflects denominator roots outside the unit circle to 1/conj(p). The
/// magnitude response keeps its shape (up to a constant gain).
inline DiscreteTransferFunction stabilize(const DiscreteTransferFunction& tf, double margin = 1e-9) {
  std::vector<std::complex<double>> roots = poles(tf);
  bool changed = false;
  for (auto& p : roots) {
    if (std::abs(p) > 1.0 + margin) {
      p = 1.0 / std::conj(p);
      changed = true;
    }
  }
  if (!changed) return tf;
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& p : roots) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] -= poly[i] * p;
    }
    poly = std::move(next);
  }
  std::vector<double> den(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) den[i] = poly[i].real();
  return {tf.numerator(), den, tf.sample_time()};
}

/// Lower-triangular Toeplitz (lifted) form of a causal LTI system on a finite
/// horizon: (G u)(k) = sum_{i <= k} h[k - i] u(i).
class LiftedOperator {
 public:
  explicit LiftedOperator(std::vector<double> impulse) : h_(std::move(impulse)) {
    if (h_.empty()) throw ArgumentError("lifted operator: empty impulse response");
  }

  int size() const noexcept { return static_cast<int>(h_.size()); }
  const std::vector<double>& impulse() const noexcept { return h_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    if (u.size() != size()) throw ArgumentError("lifted operator: size mismatch");
    Eigen::VectorXd y = Eigen::VectorXd::Zero(u.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      double acc = 0.0;
      // Newest sample first, the order the difference equation uses.
      for (Eigen::Index j = 0; j <= k; ++j) acc += h_[static_cast<std::size_t>(j)] * u(k - j);
      y(k) = acc;
    }
    return y;
  }

  Eigen::MatrixXd matrix() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) g(i, j) = h_[static_cast<std::size_t>(i - j)];
    }
    return g;
  }

 private:
  std::vector<double> h_;
};

inline LiftedOperator lift(const DiscreteTransferFunction& tf, int count) {
  return LiftedOperator(impulse_response(tf, count).h);
}

}  // namespace fosep
