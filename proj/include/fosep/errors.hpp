#pragma once

#include <stdexcept>
#include <string>

namespace fosep {

/// Input outside the mathematical domain of an operation (e.g. s outside [0, 1]).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed argument: wrong sizes, orders, indices or non-positive limits.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate geometry such as a zero tangent.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A least-squares system that does not have full column rank.
class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure that is not the caller's fault (ill conditioning, NaN).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An optimization problem without a feasible point. `family` names the
/// constraint family that is most likely responsible.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::string family)
      : std::runtime_error(what), family_(std::move(family)) {}
  const std::string& family() const noexcept { return family_; }

 private:
  std::string family_;
};

}  // namespace fosep
