#pragma once

// Models shared by several test binaries.

#include <cmath>
#include <random>
#include <vector>

#include "sesid/cpl.hpp"
#include "sesid/lure.hpp"

namespace sesid::fixture {

inline std::vector<double> integer_grid() { return uniform_breakpoints(-10.0, 1.0, 10.0); }

// beta = 7.5, d = 4, G(q) = (q - 0.5) / (q^2 - 1.6 q + 0.8), CPL sampled from 2.5 tanh(1.2 u / 2.5).
inline DttdlModel tanh_cpl_model() {
  DttdlModel m;
  m.a = {-1.6, 0.8};
  m.b = {1.0, -0.5};
  m.beta = 7.5;
  m.d = 4;
  m.nonlinearity = sample_from_function(
      [](double u) { return 2.5 * std::tanh(1.2 * u / 2.5); }, integer_grid(), 10);
  return m;
}

// Random stable model of order n with a zero-anchored CPL nonlinearity.
inline DttdlModel random_stable_model(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> root_radius(0.1, 0.85);
  std::uniform_real_distribution<double> angle(0.0, 3.14159);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Build the denominator from random roots in conjugate pairs (plus one real root if n is odd).
  std::vector<double> poly{1.0};
  auto multiply = [&poly](std::vector<double> factor) {
    std::vector<double> out(poly.size() + factor.size() - 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i)
      for (std::size_t j = 0; j < factor.size(); ++j) out[i + j] += poly[i] * factor[j];
    poly = out;
  };
  std::size_t placed = 0;
  while (placed + 2 <= n) {
    const double rho = root_radius(rng);
    const double th = angle(rng);
    multiply({1.0, -2.0 * rho * std::cos(th), rho * rho});
    placed += 2;
  }
  if (placed < n) multiply({1.0, -root_radius(rng)});
  DttdlModel m;
  m.a.assign(poly.begin() + 1, poly.end());
  for (std::size_t i = 0; i < n; ++i) m.b.push_back(0.3 * normal(rng));
  m.beta = 1.0 + std::abs(normal(rng));
  m.d = d;
  std::vector<double> mu;
  for (int i = 0; i < 6; ++i) mu.push_back(0.2 * normal(rng));
  m.nonlinearity = CplFunction({-2.0, -1.0, 0.0, 1.0, 2.0}, mu, 2, 0.0);
  return m;
}

}  // namespace sesid::fixture
