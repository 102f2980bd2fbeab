#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dgflow {

// Incompatible shapes, bad dimensions, invalid arguments to an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced (or was handed) a NaN/Inf, or hit a forbidden
// value such as a zero denominator.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The discrete backward pass met an operation without a discrete
// differential rule.
class NoDiscreteRuleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A nonlinear solve or adaptive integration did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

// Malformed, truncated or foreign files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgflow
