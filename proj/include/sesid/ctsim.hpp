#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sesid/lure.hpp"

namespace sesid {

// Continuous-time, time-delayed Lur'e system. For t >= delay:
//   x'   = A x + B v_b(t),          v_b = v(t) (beta + f(y_f)),
//   x_f' = Af x_f + Bf y(t - delay), y_f = Cf x_f + Df y(t - delay),
//   y    = C x.
struct CttdlSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::RowVectorXd C;
  double Af = -1.0;
  double Bf = 1.0;
  double Cf = -1.0;
  double Df = 1.0;
  double beta = 0.0;
  double delay = 0.0;
  Nonlinearity nonlinearity = TanhMap{};

  // Washout p / (tau p + 1) realized as Af = -1/tau, Bf = 1, Cf = -1/tau^2, Df = 1/tau.
  static CttdlSystem with_washout(Eigen::MatrixXd A, Eigen::VectorXd B, Eigen::RowVectorXd C,
                                  double tau, double beta, double delay, Nonlinearity f);

  std::size_t order() const noexcept { return static_cast<std::size_t>(A.rows()); }
  void validate() const;
  // G(0) = -C A^{-1} B.
  double dc_gain() const;
  // x0 = [C; CA; ...; CA^{n-1}]^{-1} [y0; 0; ...; 0], the state with y = y0 and zero derivatives.
  Eigen::VectorXd steady_state_for_output(double y0) const;
};

// How delayed outputs between stored nodes are reconstructed.
//   linear  - straight line between neighbouring nodes (second order overall)
//   hermite - cubic Hermite using the stored node derivatives (keeps RK4 at fourth order)
enum class DelayInterpolation { linear, hermite };

struct InputSignal {
  std::function<double(double)> value;
  // When positive the signal is held constant on [k*period, (k+1)*period); the integrator then
  // samples it once per step at the step midpoint so stage evaluations never straddle a jump.
  double hold_period = 0.0;

  static InputSignal constant(double v0);
};

// Zero-order-hold Gaussian input: v(t) = w_k on [k Ts, (k+1) Ts), w_k ~ N(mean, std^2).
class PiecewiseConstantInput {
 public:
  PiecewiseConstantInput(std::uint64_t seed, double mean, double std, double period,
                         std::size_t num_levels);

  double operator()(double t) const;
  std::span<const double> levels() const noexcept { return levels_; }
  double period() const noexcept { return period_; }
  InputSignal signal() const;

 private:
  std::vector<double> levels_;
  double period_;
};

// Uniformly spaced nodes t_i = i * spacing with full state and scalar output.
struct Trajectory {
  double spacing = 0.0;
  std::size_t dimension = 0;
  std::vector<double> t;
  std::vector<double> states;  // node-major, `dimension` values per node
  std::vector<double> y;

  std::size_t size() const noexcept { return t.size(); }
  std::span<const double> state(std::size_t i) const {
    return {states.data() + i * dimension, dimension};
  }
};

/// Fixed-step RK4 for the CTTDL system with constant output history y0 on [0, delay]:
/// x(t) = steady_state_for_output(y0) there and x_f(delay) = -Bf y0 / Af, so that y_f(delay) = 0.
/// Delayed outputs are read from the stored trajectory at each RK4 stage time.
///
/// `delay` must be an integer multiple of h (within 1e-12 relative) and at least h.
/// The returned trajectory covers [0, t_end]; its state is [x; x_f] and every
/// `output_stride`-th node is kept.
Trajectory integrate_dde(const CttdlSystem& sys, const InputSignal& v, double y0, double t_end,
                         double h, DelayInterpolation interpolation = DelayInterpolation::hermite,
                         std::size_t output_stride = 1);

struct OdeSystem {
  std::size_t dimension = 0;
  std::function<void(double t, const Eigen::VectorXd& state, Eigen::VectorXd& derivative)> field;
  // Component reported as the scalar output.
  std::size_t output_index = 0;
};

// y'' + mu0 (y^2 - 1) y' + y = 0, state [y, y'].
OdeSystem van_der_pol(double mu0);
// y' = zeta y - rho x y, x' = -xi x + phi x y, state [y, x], output y.
OdeSystem lotka_volterra(double zeta, double rho, double xi, double phi);
// phi y - xi ln y + rho x - zeta ln x, conserved along Lotka-Volterra trajectories.
double lotka_volterra_invariant(double y, double x, double zeta, double rho, double xi,
                                double phi);

/// Classic fixed-step RK4 from t = 0. Keeps every `output_stride`-th node.
Trajectory integrate_ode(const OdeSystem& sys, const Eigen::VectorXd& state0, double t_end,
                         double h, std::size_t output_stride = 1);

/// y_k = y(k Ts) + bias for every node at a multiple of Ts; v_k = input(k Ts).
/// Ts must be an integer multiple of the trajectory spacing.
SignalRecord sample(const Trajectory& trajectory, double Ts, double bias,
                    const std::function<double(double)>& input = [](double) { return 1.0; });

}  // namespace sesid
