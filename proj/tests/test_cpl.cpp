#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "sesid/cpl.hpp"
#include "sesid/error.hpp"
#include "sesid/io.hpp"

using namespace sesid;

namespace {

std::vector<double> integer_grid() { return uniform_breakpoints(-10.0, 1.0, 10.0); }

double example_tanh(double u) { return 2.5 * std::tanh(1.2 * u / 2.5); }

}  // namespace

TEST_CASE("interval index follows the left-open, right-closed partition") {
  const CplPartition part({-1.0, 0.0, 1.0}, 1);
  CHECK(part.interval_index(0.0) == 1);    // (-1, 0]
  CHECK(part.interval_index(1.5) == 3);    // beyond the last breakpoint
  CHECK(part.interval_index(-1.0) == 0);
  CHECK(part.interval_index(-1e300) == 0);
  CHECK(part.interval_index(1.0) == 2);

  const CplPartition grid(integer_grid(), 10);
  CHECK(grid.num_breakpoints() == 21);
  CHECK(grid.interval_index(-10.0) == 0);

  CHECK_THROWS_AS(part.interval_index(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("eta matches the hand-expanded vectors") {
  const CplPartition part({0.0, 1.0}, 0);
  // Same interval as the anchor: a single entry u - c_r.
  CHECK(part.eta(-0.5) == std::vector<double>{-0.5, 0.0, 0.0});
  // Two intervals above the anchor: full step c_2 - c_1, then u - c_2.
  CHECK(part.eta(2.0) == std::vector<double>{0.0, 1.0, 1.0});
  CHECK(part.eta(0.0) == std::vector<double>{0.0, 0.0, 0.0});

  const CplPartition below({-3.0, -1.0, 0.0}, 2);
  // u in interval 0, walk c_0 - c_1 and c_1 - c_2 up to the anchor.
  CHECK(below.eta(-4.0) == std::vector<double>{-1.0, -2.0, -1.0, 0.0});

  CHECK_THROWS_AS(part.eta(std::numeric_limits<double>::infinity()), DomainError);
  CHECK_THROWS_AS(part.eta(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("evaluate on simple functions") {
  const CplFunction f({0.0}, {1.0, 2.0}, 0, 0.0);
  CHECK(f(-3.0) == doctest::Approx(-3.0));
  CHECK(f(5.0) == doctest::Approx(10.0));

  const CplFunction g({-2.0, 1.0, 4.0}, {0.5, -1.0, 3.0, 0.25}, 1, 7.0);
  CHECK(g(1.0) == 7.0);
  CHECK_THROWS_AS(g(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("tanh-sampled map reproduces its breakpoint values") {
  const CplFunction f = sample_from_function(example_tanh, integer_grid(), 10);
  CHECK(f.kappa() == 0.0);
  for (double ci : f.breakpoints()) {
    CHECK(f(ci) == doctest::Approx(example_tanh(ci)).epsilon(1e-13));
  }
}

TEST_CASE("sample_from_function special cases") {
  const CplFunction id = sample_from_function([](double u) { return u; }, {-1.0, 0.0, 1.0}, 1);
  for (double m : id.slopes()) CHECK(m == doctest::Approx(1.0));
  CHECK(id.kappa() == 0.0);

  const CplFunction flat = sample_from_function([](double) { return 7.0; }, {-1.0, 0.0, 1.0}, 1);
  for (double m : flat.slopes()) CHECK(m == 0.0);
  CHECK(flat.kappa() == 7.0);

  // Outer slopes continue the adjacent interior slopes.
  const CplFunction sq = sample_from_function([](double u) { return u * u; }, {0.0, 1.0, 3.0}, 0);
  CHECK(sq.slopes()[0] == doctest::Approx(1.0));
  CHECK(sq.slopes()[3] == doctest::Approx(4.0));

  CHECK_THROWS_AS(
      sample_from_function([](double u) { return 1.0 / u; }, {-1.0, 0.0, 1.0}, 0), DomainError);
  CHECK_THROWS_AS(sample_from_function([](double u) { return u; }, {0.0}, 0), DomainError);
}

TEST_CASE("construction rejects malformed parameters") {
  CHECK_THROWS_AS(CplPartition({}, 0), DomainError);
  CHECK_THROWS_AS(CplPartition({0.0, 0.0}, 0), DomainError);
  CHECK_THROWS_AS(CplPartition({1.0, 0.0}, 0), DomainError);
  CHECK_THROWS_AS(CplPartition({0.0, 1.0}, 2), DomainError);
  CHECK_THROWS_AS(CplFunction({0.0, 1.0}, {1.0, 1.0}, 0, 0.0), DomainError);
  CHECK_THROWS_AS(CplPartition::zero_anchored({-1.0, 1.0}), ConfigError);
  CHECK(CplPartition::zero_anchored({-1.0, 1e-13, 1.0}).anchor() == 1);
}

TEST_CASE("uniform breakpoint grids hit zero exactly") {
  const auto grid = uniform_breakpoints(-0.3, 0.025, 0.3);
  CHECK(grid.size() == 25);
  CHECK(grid[12] == 0.0);
  CHECK(uniform_breakpoints(-0.08, 0.01, 0.06).size() == 15);
}

TEST_CASE("property: evaluate agrees with the piecewise oracle and eta support is tight") {
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> around(0.0, 15.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto spec = oracle::random_cpl(rng);
    const CplFunction f = spec.make();
    for (int i = 0; i < 50; ++i) {
      const double u = around(rng);
      const double expected = oracle::piecewise_value(spec.c, spec.mu, spec.r, spec.kappa, u);
      REQUIRE(std::abs(f(u) - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));

      const auto eta = f.eta(u);
      const std::size_t delta = f.interval_index(u);
      const std::size_t lo = std::min(delta, spec.r);
      const std::size_t hi = std::max(delta, spec.r);
      for (std::size_t j = 0; j < eta.size(); ++j) {
        if (j < lo || j > hi) REQUIRE(eta[j] == 0.0);
      }
    }
  }
}

TEST_CASE("property: continuity, anchor value and linearity in the slopes") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto spec = oracle::random_cpl(rng);
    const CplFunction f = spec.make();
    CHECK(f(spec.c[spec.r]) == spec.kappa);
    for (std::size_t i = 0; i < spec.c.size(); ++i) {
      const double ci = spec.c[i];
      const double eps = unit(rng) * 1e-6 * std::max(1.0, std::abs(ci)) + 1e-300;
      const double jump = std::abs(f(ci + eps) - f(ci - eps));
      REQUIRE(jump <= (std::abs(spec.mu[i]) + std::abs(spec.mu[i + 1])) * eps + 1e-12);
    }
    const double alpha = 4.0 * unit(rng) - 2.0;
    const CplFunction scaled = f.with_scaled_slopes(alpha);
    const double u = 30.0 * unit(rng) - 15.0;
    CHECK(scaled(u) ==
          doctest::Approx(alpha * (f(u) - spec.kappa) + spec.kappa).epsilon(1e-12).scale(1.0));
  }
  const CplFunction zero({-1.0, 0.0, 2.0}, {3.0, -1.0, 2.0, 5.0}, 1, 0.0);
  CHECK(zero(0.0) == 0.0);
}

TEST_CASE("property: JSON round trip is lossless") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const CplFunction f = oracle::random_cpl(rng).make();
    const auto text = io::to_json(f).dump();
    const CplFunction g = io::cpl_from_json(io::json::parse(text));
    REQUIRE(g.anchor() == f.anchor());
    REQUIRE(g.kappa() == f.kappa());
    for (std::size_t i = 0; i < f.slopes().size(); ++i) REQUIRE(g.slopes()[i] == f.slopes()[i]);
    for (std::size_t i = 0; i < f.breakpoints().size(); ++i) {
      REQUIRE(g.breakpoints()[i] == f.breakpoints()[i]);
    }
  }
  const auto j = io::to_json(CplFunction({0.0, 1.0}, {1.0, 2.0, 3.0}, 0, 0.5));
  CHECK(j.at("r") == 1);
  CHECK_THROWS_AS(io::cpl_from_json(io::json{{"c", {0.0}}, {"mu", {1.0}}, {"r", 1}, {"kappa", 0}}),
                  ConfigError);
}
