#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sesid {

// Invalid argument value (NaN, infinite, out of range, malformed shape).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad experiment or identification settings. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record is too short for the requested regression window.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Numerical failure during simulation or estimation. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::size_t index, double time = 0.0)
      : NumericalError(what), index_(index), time_(time) {}

  std::size_t index() const noexcept { return index_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t index_;
  double time_;
};

// The least-squares fit cannot be split into model parameters (e.g. theta_Lambda = 0).
class DegenerateFitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace sesid
