#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "sesid/cpl.hpp"

namespace sesid {

// amplitude * tanh(gain * (u - shift) / amplitude) + offset
struct TanhMap {
  double amplitude = 1.0;
  double gain = 1.0;
  double shift = 0.0;
  double offset = 0.0;

  double operator()(double u) const;
};

// Difference of two Gaussian bumps centred at +center and -center; odd and non-monotonic.
struct GaussianDifferenceMap {
  double peak = 1.0;
  double sigma = 1.0;
  double center = 0.0;

  double operator()(double u) const;
};

using Nonlinearity = std::variant<CplFunction, TanhMap, GaussianDifferenceMap>;

double evaluate(const Nonlinearity& f, double u);

// Discrete-time, time-delayed Lur'e model:
//   G(q) = (b_1 q^{n-1} + ... + b_n) / (q^n + a_1 q^{n-1} + ... + a_n),
//   delay q^{-d}, washout (q-1)/q, bias generation v_b = (beta + f(y_f)) v.
struct DttdlModel {
  std::vector<double> a;
  std::vector<double> b;
  double beta = 0.0;
  std::size_t d = 0;
  Nonlinearity nonlinearity = TanhMap{};

  std::size_t order() const noexcept { return a.size(); }
  // Number of initial outputs y_0 .. y_{n+d} the recursion needs.
  std::size_t history_length() const noexcept { return a.size() + d + 1; }

  void validate() const;
  // Largest root modulus of q^n + a_1 q^{n-1} + ... + a_n.
  double spectral_radius() const;
  bool is_asymptotically_stable() const { return spectral_radius() < 1.0; }
  // G(1) = sum(b) / (1 + sum(a)).
  double dc_gain() const;
};

struct SignalRecord {
  std::vector<double> v;
  std::vector<double> y;
  double sample_time = 1.0;

  std::size_t size() const noexcept { return y.size(); }
  void validate() const;
};

/// Runs the closed-loop recursion
///   y_k = -sum a_i y_{k-i} + sum b_i (beta + f(y_{f,k-i})) v_{k-i},
///   y_{f,k} = y_{k-d} - y_{k-d-1},
/// for k >= n+d+1, starting from y_init = (y_0, ..., y_{n+d}). The output has v.size() samples.
///
/// Throws DivergenceError naming the first sample whose magnitude exceeds 1e12 or is not finite.
std::vector<double> simulate(const DttdlModel& model, std::span<const double> v,
                             std::span<const double> y_init);

inline constexpr double kDivergenceBound = 1e12;

// Model with (beta * gamma, b / gamma, mu * gamma). Requires a CPL nonlinearity with kappa = 0.
DttdlModel rescaled(const DttdlModel& model, double gamma);

// True iff `model` and rescaled(model, gamma) produce outputs that agree to
// 1e-9 * max(1, |y_k|) at every step.
bool scale_equivalence_check(const DttdlModel& model, double gamma, std::span<const double> v,
                             std::span<const double> y_init);

std::vector<double> constant_sequence(std::size_t length, double value);
// Seeded i.i.d. N(mean, std^2) draws; identical seeds give identical sequences.
std::vector<double> gaussian_sequence(std::size_t length, double mean, double std,
                                      std::uint64_t seed);

}  // namespace sesid
