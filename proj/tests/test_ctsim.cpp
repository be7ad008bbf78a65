#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sesid/analysis.hpp"
#include "sesid/ctsim.hpp"
#include "sesid/error.hpp"

using namespace sesid;

namespace {

// y'(t) = -y(t - 1), y = 1 on the initial interval. Integrator time runs one delay ahead of the
// oracle's time axis because the history occupies [0, delay].
CttdlSystem unit_delay_system() {
  CttdlSystem sys;
  sys.A = Eigen::MatrixXd::Zero(1, 1);
  sys.B = Eigen::VectorXd::Ones(1);
  sys.C = Eigen::RowVectorXd::Ones(1);
  sys.Af = -1.0;
  sys.Bf = 0.0;
  sys.Cf = 0.0;
  sys.Df = -1.0;
  sys.beta = 0.0;
  sys.delay = 1.0;
  sys.nonlinearity = CplFunction({0.0}, {1.0, 1.0}, 0, 0.0);
  return sys;
}

double unit_delay_endpoint(double h, DelayInterpolation interp, double t = 5.0) {
  const auto traj = integrate_dde(unit_delay_system(), InputSignal::constant(1.0), 1.0, t + 1.0,
                                  h, interp);
  return traj.y.back();
}

CttdlSystem oscillator_plant(double beta, Nonlinearity f) {
  Eigen::MatrixXd A(2, 2);
  A << -1.0, -6.5, 1.0, 0.0;
  Eigen::VectorXd B(2);
  B << 1.0, 0.0;
  Eigen::RowVectorXd C(2);
  C << 1.0, 2.5;
  return CttdlSystem::with_washout(A, B, C, 0.001, beta, 0.1, std::move(f));
}

double order_estimate(const std::function<double(double)>& solve, double h, double reference) {
  const double e1 = std::abs(solve(h) - reference);
  const double e2 = std::abs(solve(h / 2) - reference);
  const double e4 = std::abs(solve(h / 4) - reference);
  return 0.5 * (std::log2(e1 / e2) + std::log2(e2 / e4));
}

}  // namespace

TEST_CASE("washout realization and steady state") {
  const auto sys = oscillator_plant(50.0, TanhMap{5.0, 1.0, 0.0, 0.0});
  CHECK(sys.Af == doctest::Approx(-1000.0));
  CHECK(sys.Bf == 1.0);
  CHECK(sys.Cf == doctest::Approx(-1e6));
  CHECK(sys.Df == doctest::Approx(1000.0));
  CHECK(sys.dc_gain() == doctest::Approx(2.5 / 6.5));
  const Eigen::VectorXd x0 = sys.steady_state_for_output(3.0);
  CHECK((sys.C * x0)(0) == doctest::Approx(3.0));
  CHECK((sys.C * sys.A * x0)(0) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("zero nonlinearity settles at v0 beta G(0)") {
  const auto sys = oscillator_plant(50.0, CplFunction({0.0}, {0.0, 0.0}, 0, 0.0));
  const auto traj = integrate_dde(sys, InputSignal::constant(2.5), 0.0, 30.0, 1e-3);
  CHECK(traj.y.back() == doctest::Approx(2.5 * 50.0 * 2.5 / 6.5).epsilon(1e-6));
  CHECK(2.5 * 50.0 * 2.5 / 6.5 == doctest::Approx(48.0769).epsilon(1e-5));
}

TEST_CASE("zero nonlinearity makes the CTTDL map linear in v") {
  const auto sys = oscillator_plant(50.0, CplFunction({0.0}, {0.0, 0.0}, 0, 0.0));
  const PiecewiseConstantInput w(3, 2.5, std::sqrt(0.5), 0.1, 200);
  InputSignal twice{[&w](double t) { return 2.0 * w(t); }, 0.1};
  const auto a = integrate_dde(sys, w.signal(), 0.0, 10.0, 1e-3);
  const auto b = integrate_dde(sys, twice, 0.0, 10.0, 1e-3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(std::abs(b.y[i] - 2.0 * a.y[i]) <= 1e-9 * std::max(1.0, std::abs(a.y[i])));
  }
}

TEST_CASE("unit-delay test equation matches the method of steps") {
  // First interval: 1 - t.
  const auto traj = integrate_dde(unit_delay_system(), InputSignal::constant(1.0), 1.0, 2.0, 1e-3);
  for (std::size_t i = 1000; i < traj.size(); i += 50) {
    const double t = traj.t[i] - 1.0;
    CHECK(traj.y[i] == doctest::Approx(1.0 - t).epsilon(1e-12).scale(1.0));
  }
  for (double t : {0.5, 1.7, 3.2, 5.0}) {
    CHECK(unit_delay_endpoint(1e-3, DelayInterpolation::hermite, t) ==
          doctest::Approx(oracle::unit_delay_decay(t)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("delay lookups: hermite keeps fourth order, linear is second order") {
  const double reference = unit_delay_endpoint(1e-5, DelayInterpolation::hermite);
  CHECK(reference == doctest::Approx(oracle::unit_delay_decay(5.0)).epsilon(1e-12).scale(1.0));
  auto err = [&](double h, DelayInterpolation m) {
    return std::abs(unit_delay_endpoint(h, m) - reference);
  };
  const double hermite_ratio =
      err(1e-3, DelayInterpolation::hermite) / err(5e-4, DelayInterpolation::hermite);
  const double linear_ratio =
      err(1e-3, DelayInterpolation::linear) / err(5e-4, DelayInterpolation::linear);
  MESSAGE("hermite ratio " << hermite_ratio << ", linear ratio " << linear_ratio);
  CHECK(hermite_ratio >= 12.0);
  CHECK(linear_ratio == doctest::Approx(4.0).epsilon(0.2));

  // Coarser steps keep the truncation error well above rounding.
  const double exact = oracle::unit_delay_decay(5.0);
  const double coarse_ratio =
      std::abs(unit_delay_endpoint(1e-2, DelayInterpolation::hermite) - exact) /
      std::abs(unit_delay_endpoint(5e-3, DelayInterpolation::hermite) - exact);
  CHECK(coarse_ratio == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("both interpolants are exact while the history is piecewise linear") {
  // On [1, 2] the delayed term is 1 - (t - 1), linear between nodes, so either interpolant
  // reproduces it and RK4 integrates the resulting quadratic exactly.
  for (auto mode : {DelayInterpolation::linear, DelayInterpolation::hermite}) {
    const auto traj =
        integrate_dde(unit_delay_system(), InputSignal::constant(1.0), 1.0, 3.0, 0.01, mode);
    for (std::size_t i = 200; i < traj.size(); i += 10) {
      const double t = traj.t[i] - 1.0;
      REQUIRE(std::abs(traj.y[i] - oracle::unit_delay_decay(t)) <= 1e-12);
    }
  }
}

TEST_CASE("dde argument checks") {
  const auto sys = unit_delay_system();
  CHECK_THROWS_AS(integrate_dde(sys, InputSignal::constant(1.0), 1.0, 3.0, 0.3), ConfigError);
  CHECK_THROWS_AS(integrate_dde(sys, InputSignal::constant(1.0), 1.0, 3.0, 2.0), ConfigError);
  CHECK_THROWS_AS(integrate_dde(sys, InputSignal::constant(1.0), 1.0, 3.0, -1.0), DomainError);
  auto bad = sys;
  bad.B = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(integrate_dde(bad, InputSignal::constant(1.0), 1.0, 3.0, 0.01), DomainError);
  auto blowup = sys;
  blowup.A = Eigen::MatrixXd::Constant(1, 1, 400.0);
  CHECK_THROWS_AS(integrate_dde(blowup, InputSignal::constant(1.0), 1.0, 10.0, 0.01),
                  NumericalError);
}

TEST_CASE("harmonic oscillator returns to its start after one period") {
  OdeSystem sys;
  sys.dimension = 2;
  sys.field = [](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    ds(0) = s(1);
    ds(1) = -s(0);
  };
  const double period = 2.0 * std::numbers::pi;
  const std::size_t steps = 6283;
  const auto traj = integrate_ode(sys, Eigen::Vector2d(1.0, 0.0), period, period / steps);
  const auto end = traj.state(traj.size() - 1);
  CHECK(std::abs(end[0] - 1.0) < 1e-8);
  CHECK(std::abs(end[1]) < 1e-8);
}

TEST_CASE("rk4 self-convergence order") {
  const auto vdp = van_der_pol(1.0);
  auto solve = [&](double h) {
    return integrate_ode(vdp, Eigen::Vector2d(0.1, 0.0), 4.0, h).y.back();
  };
  const double reference = solve(1e-4);
  const double p = order_estimate(solve, 0.04, reference);
  MESSAGE("van der pol order " << p);
  CHECK(p >= 3.9);
}

TEST_CASE("Lotka-Volterra first integral is conserved") {
  const double zeta = 2.0 / 3.0, rho = 4.0 / 3.0, xi = 1.0, phi = 1.0;
  const auto traj =
      integrate_ode(lotka_volterra(zeta, rho, xi, phi), Eigen::Vector2d(1.0, 1.0), 100.0, 1e-3, 100);
  const double h0 = lotka_volterra_invariant(1.0, 1.0, zeta, rho, xi, phi);
  double drift = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto s = traj.state(i);
    drift = std::max(drift, std::abs(lotka_volterra_invariant(s[0], s[1], zeta, rho, xi, phi) - h0));
  }
  CHECK(drift < 1e-6);
}

TEST_CASE("sampling picks every stride-th node and adds the bias") {
  const auto traj = integrate_ode(van_der_pol(1.0), Eigen::Vector2d(0.1, 0.0), 10.0, 0.1 / 160);
  const auto rec = sample(traj, 0.1, 10.0);
  CHECK(rec.size() == 101);
  CHECK(rec.sample_time == 0.1);
  CHECK(rec.y[0] == doctest::Approx(10.1));
  CHECK(rec.y[50] == traj.y[50 * 160] + 10.0);
  for (double v : rec.v) CHECK(v == 1.0);

  const auto same = sample(traj, traj.spacing, 0.0);
  CHECK(same.y == traj.y);
  CHECK_THROWS_AS(sample(traj, 0.1003, 0.0), ConfigError);
}

TEST_CASE("zero-order-hold gaussian input") {
  const PiecewiseConstantInput flat(1, 2.5, 0.0, 0.1, 10);
  for (double t : {0.0, 0.05, 0.33, 0.99}) CHECK(flat(t) == 2.5);

  const PiecewiseConstantInput w(7, 2.5, std::sqrt(0.5), 0.1, 10);
  const PiecewiseConstantInput again(7, 2.5, std::sqrt(0.5), 0.1, 10);
  CHECK(std::vector<double>(w.levels().begin(), w.levels().end()) ==
        std::vector<double>(again.levels().begin(), again.levels().end()));
  CHECK(w(0.0) == w.levels()[0]);
  CHECK(w(0.0999) == w.levels()[0]);
  CHECK(w(0.1) == w.levels()[1]);
  CHECK(w(0.3) == w.levels()[3]);
  CHECK(w(0.25) == w.levels()[2]);
}

TEST_CASE("oscillator plant with tanh feedback self-oscillates") {
  const auto sys = oscillator_plant(50.0, TanhMap{5.0, 1.0, 0.0, 0.0});
  const auto traj = integrate_dde(sys, InputSignal::constant(2.5), 0.0, 60.0, 1e-3,
                                  DelayInterpolation::hermite, 100);
  const auto rec = sample(traj, 0.1, 0.0);
  const std::vector<double> tail(rec.y.begin() + 300, rec.y.end());
  CHECK(is_bounded_oscillation(tail, 1e4, 1e-2));
}
