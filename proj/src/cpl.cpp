#include "sesid/cpl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sesid/error.hpp"

namespace sesid {

namespace {

void require_finite(double u, const char* what) {
  if (!std::isfinite(u)) {
    throw DomainError(std::string(what) + ": argument must be finite");
  }
}

}  // namespace

CplPartition::CplPartition(std::vector<double> breakpoints, std::size_t anchor)
    : c_(std::move(breakpoints)), anchor_(anchor) {
  if (c_.empty()) {
    throw DomainError("CplPartition: at least one breakpoint is required");
  }
  for (double ci : c_) {
    require_finite(ci, "CplPartition breakpoint");
  }
  for (std::size_t i = 1; i < c_.size(); ++i) {
    if (!(c_[i - 1] < c_[i])) {
      throw DomainError("CplPartition: breakpoints must be strictly increasing (index " +
                        std::to_string(i) + ")");
    }
  }
  if (anchor_ >= c_.size()) {
    throw DomainError("CplPartition: anchor index " + std::to_string(anchor_) +
                      " out of range for " + std::to_string(c_.size()) + " breakpoints");
  }
}

CplPartition CplPartition::zero_anchored(std::vector<double> breakpoints) {
  auto it = std::find_if(breakpoints.begin(), breakpoints.end(),
                         [](double ci) { return std::abs(ci) <= 1e-12; });
  if (it == breakpoints.end()) {
    throw ConfigError("breakpoint grid must contain 0 so the identified map satisfies f(0) = 0");
  }
  const auto anchor = static_cast<std::size_t>(it - breakpoints.begin());
  *it = 0.0;
  return CplPartition(std::move(breakpoints), anchor);
}

std::size_t CplPartition::interval_index(double u) const {
  if (std::isnan(u)) {
    throw DomainError("interval_index: NaN argument");
  }
  // Number of breakpoints strictly below u; a point equal to c_i falls in interval i.
  return static_cast<std::size_t>(std::lower_bound(c_.begin(), c_.end(), u) - c_.begin());
}

std::vector<double> CplPartition::eta(double u) const {
  std::vector<double> out(num_intervals());
  eta(u, out);
  return out;
}

void CplPartition::eta(double u, std::span<double> out) const {
  require_finite(u, "eta");
  if (out.size() != num_intervals()) {
    throw DomainError("eta: output span has wrong length");
  }
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t delta = interval_index(u);
  const std::size_t r = anchor_;
  if (delta <= r) {
    // Walk down from the anchor: full steps c_{j-1} - c_j, then the partial step.
    out[delta] = u - c_[delta];
    for (std::size_t j = delta + 1; j <= r; ++j) {
      out[j] = c_[j - 1] - c_[j];
    }
  } else {
    for (std::size_t j = r + 1; j < delta; ++j) {
      out[j] = c_[j] - c_[j - 1];
    }
    out[delta] = u - c_[delta - 1];
  }
}

CplFunction::CplFunction(CplPartition partition, std::vector<double> slopes, double kappa)
    : partition_(std::move(partition)), mu_(std::move(slopes)), kappa_(kappa) {
  if (mu_.size() != partition_.num_intervals()) {
    throw DomainError("CplFunction: need " + std::to_string(partition_.num_intervals()) +
                      " slopes, got " + std::to_string(mu_.size()));
  }
  for (double m : mu_) {
    require_finite(m, "CplFunction slope");
  }
  require_finite(kappa_, "CplFunction kappa");
}

CplFunction::CplFunction(std::vector<double> breakpoints, std::vector<double> slopes,
                         std::size_t anchor, double kappa)
    : CplFunction(CplPartition(std::move(breakpoints), anchor), std::move(slopes), kappa) {}

double CplFunction::evaluate(double u) const {
  require_finite(u, "CplFunction::evaluate");
  const auto c = partition_.breakpoints();
  const std::size_t delta = partition_.interval_index(u);
  const std::size_t r = partition_.anchor();
  // Same sum as mu^T eta(u), restricted to the nonzero support of eta.
  double acc = 0.0;
  if (delta <= r) {
    acc += mu_[delta] * (u - c[delta]);
    for (std::size_t j = delta + 1; j <= r; ++j) {
      acc += mu_[j] * (c[j - 1] - c[j]);
    }
  } else {
    for (std::size_t j = r + 1; j < delta; ++j) {
      acc += mu_[j] * (c[j] - c[j - 1]);
    }
    acc += mu_[delta] * (u - c[delta - 1]);
  }
  return acc + kappa_;
}

CplFunction CplFunction::with_scaled_slopes(double factor) const {
  std::vector<double> mu = mu_;
  for (double& m : mu) {
    m *= factor;
  }
  return CplFunction(partition_, std::move(mu), kappa_);
}

CplFunction sample_from_function(const std::function<double(double)>& g,
                                 std::vector<double> breakpoints, std::size_t anchor) {
  if (breakpoints.size() < 2) {
    throw DomainError("sample_from_function: need at least two breakpoints");
  }
  CplPartition partition(std::move(breakpoints), anchor);
  const auto c = partition.breakpoints();
  const std::size_t p = c.size();
  std::vector<double> values(p);
  for (std::size_t i = 0; i < p; ++i) {
    values[i] = g(c[i]);
    if (!std::isfinite(values[i])) {
      throw DomainError("sample_from_function: g is not finite at breakpoint " +
                        std::to_string(i));
    }
  }
  std::vector<double> mu(p + 1);
  for (std::size_t i = 1; i < p; ++i) {
    mu[i] = (values[i] - values[i - 1]) / (c[i] - c[i - 1]);
  }
  mu[0] = mu[1];
  mu[p] = mu[p - 1];
  const double kappa = values[anchor];
  return CplFunction(std::move(partition), std::move(mu), kappa);
}

std::vector<double> uniform_breakpoints(double first, double step, double last) {
  if (!(step > 0.0) || !(last >= first) || !std::isfinite(first) || !std::isfinite(last)) {
    throw DomainError("uniform_breakpoints: need step > 0 and last >= first");
  }
  const auto count = static_cast<std::size_t>(std::llround((last - first) / step)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Zero must come out exact so zero-anchored partitions find it.
    const double x = first + static_cast<double>(i) * step;
    out[i] = std::abs(x) < 1e-12 * std::max(1.0, std::abs(step)) ? 0.0 : x;
  }
  return out;
}

}  // namespace sesid
