#include "sesid/ctsim.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sesid/error.hpp"

namespace sesid {

namespace {

// Integer n with value == n * step, or ConfigError.
std::size_t exact_multiple(double value, double step, const char* what) {
  const double ratio = value / step;
  const double n = std::round(ratio);
  if (n < 0.0 || std::abs(value - n * step) > 1e-12 * std::max(1.0, std::abs(value))) {
    throw ConfigError(std::string(what) + " must be an integer multiple of the step size");
  }
  return static_cast<std::size_t>(n);
}

// z += increment with Kahan compensation; `carry` holds the low-order bits lost so far.
void compensated_add(Eigen::VectorXd& z, Eigen::VectorXd& carry, const Eigen::VectorXd& increment) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double y = increment(i) - carry(i);
    const double t = z(i) + y;
    carry(i) = (t - z(i)) - y;
    z(i) = t;
  }
}

void require_positive_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw DomainError("step size must be positive and finite");
  }
}

}  // namespace

CttdlSystem CttdlSystem::with_washout(Eigen::MatrixXd A, Eigen::VectorXd B, Eigen::RowVectorXd C,
                                      double tau, double beta, double delay, Nonlinearity f) {
  CttdlSystem sys;
  sys.A = std::move(A);
  sys.B = std::move(B);
  sys.C = std::move(C);
  sys.Af = -1.0 / tau;
  sys.Bf = 1.0;
  sys.Cf = -1.0 / (tau * tau);
  sys.Df = 1.0 / tau;
  sys.beta = beta;
  sys.delay = delay;
  sys.nonlinearity = std::move(f);
  return sys;
}

void CttdlSystem::validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n || B.size() != n || C.size() != n) {
    throw DomainError("CttdlSystem: inconsistent (A, B, C) dimensions");
  }
  if (!(delay > 0.0)) {
    throw DomainError("CttdlSystem: delay must be positive");
  }
  if (Af == 0.0) {
    throw DomainError("CttdlSystem: washout pole Af must be nonzero");
  }
}

double CttdlSystem::dc_gain() const {
  return -(C * A.fullPivLu().solve(B))(0);
}

Eigen::VectorXd CttdlSystem::steady_state_for_output(double y0) const {
  const auto n = A.rows();
  Eigen::MatrixXd obs(n, n);
  Eigen::RowVectorXd row = C;
  for (Eigen::Index i = 0; i < n; ++i) {
    obs.row(i) = row;
    row = row * A;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(0) = y0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(obs);
  if (!lu.isInvertible()) {
    throw DomainError("CttdlSystem: (A, C) is not observable");
  }
  return lu.solve(rhs);
}

InputSignal InputSignal::constant(double v0) {
  return InputSignal{[v0](double) { return v0; }, 0.0};
}

PiecewiseConstantInput::PiecewiseConstantInput(std::uint64_t seed, double mean, double std,
                                               double period, std::size_t num_levels)
    : levels_(gaussian_sequence(num_levels, mean, std, seed)), period_(period) {
  if (!(period > 0.0) || num_levels == 0) {
    throw DomainError("PiecewiseConstantInput: need positive period and at least one level");
  }
}

double PiecewiseConstantInput::operator()(double t) const {
  // The 1e-9 nudge keeps t = k * period (computed in floating point) in interval k.
  const double pos = std::floor(t / period_ + 1e-9);
  if (pos <= 0.0) {
    return levels_.front();
  }
  const auto k = static_cast<std::size_t>(pos);
  return k < levels_.size() ? levels_[k] : levels_.back();
}

InputSignal PiecewiseConstantInput::signal() const {
  return InputSignal{[self = *this](double t) { return self(t); }, period_};
}

Trajectory integrate_dde(const CttdlSystem& sys, const InputSignal& v, double y0, double t_end,
                         double h, DelayInterpolation interpolation, std::size_t output_stride) {
  sys.validate();
  require_positive_step(h);
  if (output_stride == 0) {
    throw DomainError("integrate_dde: output_stride must be positive");
  }
  const std::size_t delay_steps = exact_multiple(sys.delay, h, "delay");
  if (delay_steps == 0) {
    throw ConfigError("integrate_dde: delay must be at least one step");
  }
  if (!(t_end >= sys.delay)) {
    throw DomainError("integrate_dde: t_end must be at least the delay");
  }
  const auto last = static_cast<std::size_t>(std::llround(t_end / h));
  const auto n = static_cast<Eigen::Index>(sys.order());
  const Eigen::Index dim = n + 1;

  // Dense output and its right derivative at every node; delayed lookups read these.
  std::vector<double> y(last + 1, y0);
  std::vector<double> dy(last + 1, 0.0);

  Trajectory traj;
  traj.spacing = h * static_cast<double>(output_stride);
  traj.dimension = static_cast<std::size_t>(dim);
  const std::size_t kept = last / output_stride + 1;
  traj.t.reserve(kept);
  traj.y.reserve(kept);
  traj.states.reserve(kept * traj.dimension);

  Eigen::VectorXd z(dim);
  z.head(n) = sys.steady_state_for_output(y0);
  z(n) = -sys.Bf * y0 / sys.Af;

  auto keep = [&](std::size_t i) {
    if (i % output_stride == 0) {
      traj.t.push_back(static_cast<double>(i) * h);
      traj.y.push_back(y[i]);
      traj.states.insert(traj.states.end(), z.data(), z.data() + dim);
    }
  };
  for (std::size_t i = 0; i <= delay_steps && i <= last; ++i) {
    keep(i);
  }

  // Output at fractional node position `pos` (in units of h).
  auto delayed_output = [&](double pos) {
    if (pos <= static_cast<double>(delay_steps)) {
      return y0;
    }
    const double base = std::floor(pos);
    const auto j = static_cast<std::size_t>(base);
    const double theta = pos - base;
    if (theta == 0.0) {
      return y[j];
    }
    if (interpolation == DelayInterpolation::linear) {
      return (1.0 - theta) * y[j] + theta * y[j + 1];
    }
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * y[j] + (t3 - 2.0 * t2 + theta) * h * dy[j] +
           (-2.0 * t3 + 3.0 * t2) * y[j + 1] + (t3 - t2) * h * dy[j + 1];
  };

  auto rhs = [&](const Eigen::VectorXd& state, double y_delayed, double input,
                 Eigen::VectorXd& out) {
    const double yf = sys.Cf * state(n) + sys.Df * y_delayed;
    const double vb = input * (sys.beta + evaluate(sys.nonlinearity, yf));
    out.head(n).noalias() = sys.A * state.head(n);
    out.head(n) += sys.B * vb;
    out(n) = sys.Af * state(n) + sys.Bf * y_delayed;
  };

  Eigen::VectorXd k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = delay_steps; i < last; ++i) {
    const double t = static_cast<double>(i) * h;
    const double lag = static_cast<double>(i) - static_cast<double>(delay_steps);
    const bool held = v.hold_period > 0.0;
    const double v_mid = v.value(t + 0.5 * h);
    const double v0 = held ? v_mid : v.value(t);
    const double v1 = held ? v_mid : v.value(t + h);

    rhs(z, delayed_output(lag), v0, k1);
    dy[i] = (sys.C * k1.head(n))(0);
    const double y_half = delayed_output(lag + 0.5);
    tmp = z + 0.5 * h * k1;
    rhs(tmp, y_half, v_mid, k2);
    tmp = z + 0.5 * h * k2;
    rhs(tmp, y_half, v_mid, k3);
    tmp = z + h * k3;
    rhs(tmp, delayed_output(lag + 1.0), v1, k4);
    tmp = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    compensated_add(z, carry, tmp);

    if (!z.allFinite()) {
      throw DivergenceError("integrate_dde: state not finite at t=" + std::to_string(t + h), i + 1,
                            t + h);
    }
    y[i + 1] = (sys.C * z.head(n))(0);
    keep(i + 1);
  }
  return traj;
}

OdeSystem van_der_pol(double mu0) {
  OdeSystem sys;
  sys.dimension = 2;
  sys.field = [mu0](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    ds(0) = s(1);
    ds(1) = -mu0 * (s(0) * s(0) - 1.0) * s(1) - s(0);
  };
  return sys;
}

OdeSystem lotka_volterra(double zeta, double rho, double xi, double phi) {
  OdeSystem sys;
  sys.dimension = 2;
  sys.field = [=](double, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    const double yv = s(0);
    const double xv = s(1);
    ds(0) = zeta * yv - rho * xv * yv;
    ds(1) = -xi * xv + phi * xv * yv;
  };
  return sys;
}

double lotka_volterra_invariant(double y, double x, double zeta, double rho, double xi,
                                double phi) {
  return phi * y - xi * std::log(y) + rho * x - zeta * std::log(x);
}

Trajectory integrate_ode(const OdeSystem& sys, const Eigen::VectorXd& state0, double t_end,
                         double h, std::size_t output_stride) {
  require_positive_step(h);
  if (sys.dimension == 0 || static_cast<std::size_t>(state0.size()) != sys.dimension ||
      sys.output_index >= sys.dimension) {
    throw DomainError("integrate_ode: state dimension mismatch");
  }
  if (output_stride == 0 || !(t_end >= 0.0)) {
    throw DomainError("integrate_ode: need output_stride > 0 and t_end >= 0");
  }
  const auto last = static_cast<std::size_t>(std::llround(t_end / h));
  const auto dim = static_cast<Eigen::Index>(sys.dimension);
  const auto out = static_cast<Eigen::Index>(sys.output_index);

  Trajectory traj;
  traj.spacing = h * static_cast<double>(output_stride);
  traj.dimension = sys.dimension;
  const std::size_t kept = last / output_stride + 1;
  traj.t.reserve(kept);
  traj.y.reserve(kept);
  traj.states.reserve(kept * sys.dimension);

  Eigen::VectorXd z = state0;
  auto keep = [&](std::size_t i) {
    if (i % output_stride == 0) {
      traj.t.push_back(static_cast<double>(i) * h);
      traj.y.push_back(z(out));
      traj.states.insert(traj.states.end(), z.data(), z.data() + dim);
    }
  };
  keep(0);

  Eigen::VectorXd k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < last; ++i) {
    const double t = static_cast<double>(i) * h;
    sys.field(t, z, k1);
    tmp = z + 0.5 * h * k1;
    sys.field(t + 0.5 * h, tmp, k2);
    tmp = z + 0.5 * h * k2;
    sys.field(t + 0.5 * h, tmp, k3);
    tmp = z + h * k3;
    sys.field(t + h, tmp, k4);
    tmp = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    compensated_add(z, carry, tmp);
    if (!z.allFinite()) {
      throw DivergenceError("integrate_ode: state not finite at t=" + std::to_string(t + h), i + 1,
                            t + h);
    }
    keep(i + 1);
  }
  return traj;
}

SignalRecord sample(const Trajectory& trajectory, double Ts, double bias,
                    const std::function<double(double)>& input) {
  if (!(Ts > 0.0)) {
    throw DomainError("sample: Ts must be positive");
  }
  const std::size_t stride = exact_multiple(Ts, trajectory.spacing, "sample time");
  if (stride == 0) {
    throw ConfigError("sample: sample time shorter than the trajectory spacing");
  }
  SignalRecord rec;
  rec.sample_time = Ts;
  for (std::size_t i = 0; i < trajectory.size(); i += stride) {
    const double t = static_cast<double>(rec.y.size()) * Ts;
    rec.y.push_back(trajectory.y[i] + bias);
    rec.v.push_back(input(t));
  }
  return rec;
}

}  // namespace sesid
