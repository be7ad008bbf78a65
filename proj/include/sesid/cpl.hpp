#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sesid {

/**
 * Partition of the real line by strictly increasing breakpoints c_0 < ... < c_{p-1}
 * into the p+1 intervals (-inf, c_0], (c_0, c_1], ..., (c_{p-1}, inf), together with
 * the anchor breakpoint at which the piecewise-linear function takes its offset value.
 *
 * All indices are 0-based: interval i is (c_{i-1}, c_i], interval 0 is unbounded on
 * the left and interval p is unbounded on the right.
 */
class CplPartition {
 public:
  CplPartition(std::vector<double> breakpoints, std::size_t anchor);

  // Partition whose anchor is the breakpoint equal to zero (within 1e-12).
  // Throws ConfigError when no breakpoint is zero.
  static CplPartition zero_anchored(std::vector<double> breakpoints);

  std::size_t num_breakpoints() const noexcept { return c_.size(); }
  std::size_t num_intervals() const noexcept { return c_.size() + 1; }
  std::span<const double> breakpoints() const noexcept { return c_; }
  double breakpoint(std::size_t i) const { return c_.at(i); }
  std::size_t anchor() const noexcept { return anchor_; }

  // Index of the interval containing u, in [0, p]. NaN is a DomainError.
  std::size_t interval_index(double u) const;

  // Regressor vector eta(u) of length p+1, so that f(u) = mu^T eta(u) + kappa.
  std::vector<double> eta(double u) const;
  // Same, written into `out` (size p+1). Entries outside [min(delta, r), max(delta, r)] are zeroed.
  void eta(double u, std::span<double> out) const;

 private:
  std::vector<double> c_;
  std::size_t anchor_;
};

// Continuous piecewise-linear function: slope mu_i on interval i, value kappa at c_anchor.
class CplFunction {
 public:
  CplFunction(CplPartition partition, std::vector<double> slopes, double kappa);
  CplFunction(std::vector<double> breakpoints, std::vector<double> slopes, std::size_t anchor,
              double kappa);

  const CplPartition& partition() const noexcept { return partition_; }
  std::span<const double> breakpoints() const noexcept { return partition_.breakpoints(); }
  std::span<const double> slopes() const noexcept { return mu_; }
  std::size_t anchor() const noexcept { return partition_.anchor(); }
  double kappa() const noexcept { return kappa_; }

  std::size_t interval_index(double u) const { return partition_.interval_index(u); }
  std::vector<double> eta(double u) const { return partition_.eta(u); }

  // mu^T eta(u) + kappa. Rejects non-finite u.
  double evaluate(double u) const;
  double operator()(double u) const { return evaluate(u); }

  // Same partition and offset, slopes multiplied by `factor`.
  CplFunction with_scaled_slopes(double factor) const;

 private:
  CplPartition partition_;
  std::vector<double> mu_;
  double kappa_;
};

// CPL interpolant of g on the breakpoints, anchored at c_anchor with kappa = g(c_anchor).
// The two unbounded intervals continue the adjacent interior slope. Needs p >= 2.
CplFunction sample_from_function(const std::function<double(double)>& g,
                                 std::vector<double> breakpoints, std::size_t anchor);

// Uniform grid first, first+step, ..., last (inclusive, tolerant to rounding in `step`).
std::vector<double> uniform_breakpoints(double first, double step, double last);

}  // namespace sesid
