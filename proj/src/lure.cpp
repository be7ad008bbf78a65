#include "sesid/lure.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "sesid/error.hpp"

namespace sesid {

double TanhMap::operator()(double u) const {
  return amplitude * std::tanh(gain * (u - shift) / amplitude) + offset;
}

double GaussianDifferenceMap::operator()(double u) const {
  const double scale = peak / (sigma * std::sqrt(2.0 * std::numbers::pi));
  const double zm = (u + center) / sigma;
  const double zp = (u - center) / sigma;
  return scale * (std::exp(-0.5 * zp * zp) - std::exp(-0.5 * zm * zm));
}

double evaluate(const Nonlinearity& f, double u) {
  return std::visit([u](const auto& g) { return g(u); }, f);
}

void DttdlModel::validate() const {
  if (a.empty() || a.size() != b.size()) {
    throw DomainError("DttdlModel: a and b must have the same nonzero length");
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(a.begin(), a.end(), finite) || !std::all_of(b.begin(), b.end(), finite) ||
      !std::isfinite(beta)) {
    throw DomainError("DttdlModel: coefficients must be finite");
  }
}

double DttdlModel::spectral_radius() const {
  validate();
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    companion(0, j) = -a[static_cast<std::size_t>(j)];
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    companion(i, i - 1) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double DttdlModel::dc_gain() const {
  double num = 0.0;
  double den = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += b[i];
    den += a[i];
  }
  return num / den;
}

void SignalRecord::validate() const {
  if (v.size() != y.size()) {
    throw DomainError("SignalRecord: v and y lengths differ (" + std::to_string(v.size()) +
                      " vs " + std::to_string(y.size()) + ")");
  }
  if (!(sample_time > 0.0) || !std::isfinite(sample_time)) {
    throw DomainError("SignalRecord: sample_time must be positive");
  }
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!std::isfinite(v[k]) || !std::isfinite(y[k])) {
      throw DomainError("SignalRecord: non-finite sample at k=" + std::to_string(k));
    }
  }
}

std::vector<double> simulate(const DttdlModel& model, std::span<const double> v,
                             std::span<const double> y_init) {
  model.validate();
  const std::size_t n = model.order();
  const std::size_t d = model.d;
  const std::size_t start = model.history_length();
  if (y_init.size() != start) {
    throw DomainError("simulate: y_init must hold n+d+1 = " + std::to_string(start) + " values");
  }
  if (v.size() < start) {
    throw DomainError("simulate: input shorter than the initial history");
  }
  std::vector<double> y(v.size());
  std::copy(y_init.begin(), y_init.end(), y.begin());

  // Feedback term (beta + f(y_f,j)) v_j, cached per j since each is used n times.
  std::vector<double> drive(v.size(), 0.0);
  auto fill_drive = [&](std::size_t j) {
    const double yf = y[j - d] - y[j - d - 1];
    drive[j] = (model.beta + evaluate(model.nonlinearity, yf)) * v[j];
  };
  for (std::size_t j = d + 1; j < start; ++j) {
    fill_drive(j);
  }

  for (std::size_t k = start; k < v.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      acc += -model.a[i - 1] * y[k - i] + model.b[i - 1] * drive[k - i];
    }
    if (!std::isfinite(acc) || std::abs(acc) > kDivergenceBound) {
      throw DivergenceError("simulate: output diverged at k=" + std::to_string(k), k);
    }
    y[k] = acc;
    fill_drive(k);
  }
  return y;
}

DttdlModel rescaled(const DttdlModel& model, double gamma) {
  if (gamma == 0.0 || !std::isfinite(gamma)) {
    throw DomainError("rescaled: gamma must be finite and nonzero");
  }
  const auto* cpl = std::get_if<CplFunction>(&model.nonlinearity);
  if (cpl == nullptr || cpl->kappa() != 0.0) {
    throw DomainError("rescaled: needs a CPL nonlinearity with kappa = 0");
  }
  DttdlModel out = model;
  out.beta *= gamma;
  for (double& bi : out.b) {
    bi /= gamma;
  }
  out.nonlinearity = cpl->with_scaled_slopes(gamma);
  return out;
}

bool scale_equivalence_check(const DttdlModel& model, double gamma, std::span<const double> v,
                             std::span<const double> y_init) {
  const auto y0 = simulate(model, v, y_init);
  const auto y1 = simulate(rescaled(model, gamma), v, y_init);
  for (std::size_t k = 0; k < y0.size(); ++k) {
    const double scale = std::max({1.0, std::abs(y0[k]), std::abs(y1[k])});
    if (std::abs(y0[k] - y1[k]) > 1e-9 * scale) {
      return false;
    }
  }
  return true;
}

std::vector<double> constant_sequence(std::size_t length, double value) {
  return std::vector<double>(length, value);
}

std::vector<double> gaussian_sequence(std::size_t length, double mean, double std,
                                      std::uint64_t seed) {
  if (!(std >= 0.0)) {
    throw DomainError("gaussian_sequence: std must be nonnegative");
  }
  std::vector<double> out(length, mean);
  if (std == 0.0) {
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, std);
  for (double& x : out) {
    x = dist(rng);
  }
  return out;
}

}  // namespace sesid
