#include "sesid/experiment.hpp"

#include <fftw3.h>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "sesid/error.hpp"
#include "sesid/io.hpp"

namespace sesid::experiment {

namespace {

// ---------------------------------------------------------------------------------------------
// Field-addressed JSON access

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field " + path + ": " + what);
}

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) fail(path, "must be an object");
  if (!obj.contains(key)) fail(join(path, key), "is required");
  return obj.at(key);
}

double number(const json& obj, const std::string& path, const char* key) {
  const json& x = field(obj, path, key);
  if (!x.is_number()) fail(join(path, key), "must be a number");
  const double v = x.get<double>();
  if (!std::isfinite(v)) fail(join(path, key), "must be finite");
  return v;
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  return obj.contains(key) ? number(obj, path, key) : fallback;
}

std::uint64_t unsigned_integer(const json& obj, const std::string& path, const char* key) {
  const json& x = field(obj, path, key);
  if (!x.is_number_integer() || x.get<long long>() < 0) {
    fail(join(path, key), "must be a nonnegative integer");
  }
  return x.get<std::uint64_t>();
}

std::size_t size_field(const json& obj, const std::string& path, const char* key) {
  return static_cast<std::size_t>(unsigned_integer(obj, path, key));
}

bool boolean_or(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) fail(join(path, key), "must be true or false");
  return obj.at(key).get<bool>();
}

std::string string_field(const json& obj, const std::string& path, const char* key) {
  const json& x = field(obj, path, key);
  if (!x.is_string()) fail(join(path, key), "must be a string");
  return x.get<std::string>();
}

std::vector<double> number_array(const json& x, const std::string& path) {
  if (!x.is_array()) fail(path, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "must be a number");
    out.push_back(x[i].get<double>());
  }
  return out;
}

std::vector<std::size_t> size_array(const json& x, const std::string& path) {
  if (!x.is_array() || x.empty()) fail(path, "must be a nonempty array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i].is_number_integer() || x[i].get<long long>() < 0) {
      fail(path + "[" + std::to_string(i) + "]", "must be a nonnegative integer");
    }
    out.push_back(x[i].get<std::size_t>());
  }
  return out;
}

// Either an explicit array or {"first", "step", "last"}.
std::vector<double> grid(const json& x, const std::string& path) {
  if (x.is_array()) return number_array(x, path);
  if (!x.is_object()) fail(path, "must be an array or a {first, step, last} grid");
  const double first = number(x, path, "first");
  const double step = number(x, path, "step");
  const double last = number(x, path, "last");
  if (!(step > 0.0) || last < first) fail(path, "grid needs step > 0 and last >= first");
  return uniform_breakpoints(first, step, last);
}

// "std" or "variance"; the paper quotes most spreads as square roots.
std::optional<double> spread(const json& obj, const std::string& path) {
  if (obj.contains("std") && obj.contains("variance")) {
    fail(path, "give either std or variance, not both");
  }
  if (obj.contains("std")) {
    const double s = number(obj, path, "std");
    if (s < 0.0) fail(join(path, "std"), "must be nonnegative");
    return s;
  }
  if (obj.contains("variance")) {
    const double v = number(obj, path, "variance");
    if (v < 0.0) fail(join(path, "variance"), "must be nonnegative");
    return std::sqrt(v);
  }
  return std::nullopt;
}

template <class F>
auto rethrow_as_config(const std::string& path, F&& make) -> decltype(make()) {
  try {
    return make();
  } catch (const DomainError& e) {
    fail(path, e.what());
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

// ---------------------------------------------------------------------------------------------
// Section parsers

InputSpec parse_input(const json& x, const std::string& path) {
  InputSpec in;
  const std::string type = string_field(x, path, "type");
  if (type == "constant") {
    in.kind = InputSpec::Kind::constant;
    in.mean = number(x, path, "value");
    return in;
  }
  if (type == "gaussian") {
    in.kind = InputSpec::Kind::gaussian;
  } else if (type == "zoh_gaussian") {
    in.kind = InputSpec::Kind::zoh_gaussian;
  } else {
    fail(join(path, "type"), "must be constant, gaussian or zoh_gaussian");
  }
  in.mean = number(x, path, "mean");
  const auto s = spread(x, path);
  if (!s) fail(path, "needs std or variance");
  in.std = *s;
  in.seed = unsigned_integer(x, path, "seed");
  return in;
}

Nonlinearity parse_nonlinearity(const json& x, const std::string& path) {
  if (x.is_object() && x.value("type", std::string()) == "sampled") {
    const auto c = grid(field(x, path, "c"), join(path, "c"));
    const auto g = parse_nonlinearity(field(x, path, "function"), join(path, "function"));
    if (std::holds_alternative<CplFunction>(g)) fail(join(path, "function"), "must be smooth");
    std::size_t anchor = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (std::abs(c[i]) <= 1e-12) anchor = i;
    }
    return rethrow_as_config(path, [&]() -> Nonlinearity {
      return sample_from_function([&g](double u) { return evaluate(g, u); }, c, anchor);
    });
  }
  try {
    return io::nonlinearity_from_json(x);
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

TruthSpec parse_truth(const json& x, const std::string& path) {
  TruthSpec t;
  const std::string type = string_field(x, path, "type");
  if (type == "dttdl") {
    t.kind = TruthSpec::Kind::dttdl;
    t.dttdl.a = number_array(field(x, path, "a"), join(path, "a"));
    t.dttdl.b = number_array(field(x, path, "b"), join(path, "b"));
    t.dttdl.beta = number(x, path, "beta");
    t.dttdl.d = size_field(x, path, "d");
    t.dttdl.nonlinearity = parse_nonlinearity(field(x, path, "nonlinearity"),
                                              join(path, "nonlinearity"));
    rethrow_as_config(path, [&] { t.dttdl.validate(); });
    const std::string ip = join(path, "initial");
    const json& init = field(x, path, "initial");
    const std::string itype = string_field(init, ip, "type");
    if (itype == "constant") {
      t.initial.value = number(init, ip, "value");
    } else if (itype == "gaussian") {
      t.initial.random = true;
      t.initial.value = number_or(init, ip, "mean", 0.0);
      t.initial.std = spread(init, ip).value_or(1.0);
      t.initial.seed = unsigned_integer(init, ip, "seed");
    } else {
      fail(join(ip, "type"), "must be constant or gaussian");
    }
    t.sample_time = number_or(x, path, "sample_time", 1.0);
    return t;
  }
  t.sample_time = number(x, path, "sample_time");
  if (!(t.sample_time > 0.0)) fail(join(path, "sample_time"), "must be positive");
  t.bias = number_or(x, path, "bias", 0.0);
  if (type == "cttdl") {
    t.kind = TruthSpec::Kind::cttdl;
    const json& A = field(x, path, "A");
    if (!A.is_array() || A.empty()) fail(join(path, "A"), "must be a square array of rows");
    const auto n = static_cast<Eigen::Index>(A.size());
    Eigen::MatrixXd Am(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string rp = join(path, "A") + "[" + std::to_string(i) + "]";
      const auto row = number_array(A[static_cast<std::size_t>(i)], rp);
      if (static_cast<Eigen::Index>(row.size()) != n) fail(rp, "row length differs from row count");
      for (Eigen::Index j = 0; j < n; ++j) Am(i, j) = row[static_cast<std::size_t>(j)];
    }
    const auto B = number_array(field(x, path, "B"), join(path, "B"));
    const auto C = number_array(field(x, path, "C"), join(path, "C"));
    if (static_cast<Eigen::Index>(B.size()) != n || static_cast<Eigen::Index>(C.size()) != n) {
      fail(path, "B and C must match the size of A");
    }
    const double tau = number(x, path, "tau");
    if (!(tau > 0.0)) fail(join(path, "tau"), "must be positive");
    t.cttdl = CttdlSystem::with_washout(
        Am, Eigen::Map<const Eigen::VectorXd>(B.data(), n),
        Eigen::Map<const Eigen::RowVectorXd>(C.data(), n), tau, number(x, path, "beta"),
        number(x, path, "delay"),
        parse_nonlinearity(field(x, path, "nonlinearity"), join(path, "nonlinearity")));
    rethrow_as_config(path, [&] { t.cttdl.validate(); });
    t.step = number(x, path, "step");
    t.y0 = number_or(x, path, "y0", 0.0);
    t.steps_per_sample = static_cast<std::size_t>(std::llround(t.sample_time / t.step));
    if (t.steps_per_sample == 0 ||
        std::abs(static_cast<double>(t.steps_per_sample) * t.step - t.sample_time) >
            1e-12 * t.sample_time) {
      fail(join(path, "step"), "must divide sample_time");
    }
    return t;
  }
  t.steps_per_sample = size_field(x, path, "steps_per_sample");
  if (t.steps_per_sample == 0) fail(join(path, "steps_per_sample"), "must be positive");
  t.state0 = number_array(field(x, path, "state0"), join(path, "state0"));
  if (t.state0.size() != 2) fail(join(path, "state0"), "must hold two values");
  if (type == "van_der_pol") {
    t.kind = TruthSpec::Kind::van_der_pol;
    t.mu0 = number(x, path, "mu0");
    return t;
  }
  if (type == "lotka_volterra") {
    t.kind = TruthSpec::Kind::lotka_volterra;
    t.zeta = number(x, path, "zeta");
    t.rho = number(x, path, "rho");
    t.xi = number(x, path, "xi");
    t.phi = number(x, path, "phi");
    if (t.state0[0] <= 0.0 || t.state0[1] <= 0.0) {
      fail(join(path, "state0"), "populations must be positive");
    }
    return t;
  }
  fail(join(path, "type"), "must be dttdl, cttdl, van_der_pol or lotka_volterra");
}

Solver parse_solver(const json& x, const std::string& path) {
  const std::string type = string_field(x, path, "type");
  if (type == "batch") return BatchSolver{};
  if (type != "rls") fail(join(path, "type"), "must be rls or batch");
  RlsSolver s;
  s.theta0 = number_or(x, path, "theta0", 0.0);
  s.P0 = number(x, path, "P0");
  s.lambda = number_or(x, path, "lambda", 1.0);
  if (!(s.P0 > 0.0)) fail(join(path, "P0"), "must be positive");
  if (!(s.lambda > 0.0) || s.lambda > 1.0) fail(join(path, "lambda"), "must lie in (0, 1]");
  return s;
}

std::size_t history_length(const TruthSpec& t) {
  return t.kind == TruthSpec::Kind::dttdl ? t.dttdl.history_length() : 1;
}

// ---------------------------------------------------------------------------------------------
// Presets

const std::map<std::string, const char*>& preset_table() {
  static const std::map<std::string, const char*> table{
      {"example1", R"({
  "schema_version": 1,
  "name": "example1",
  "samples": 25001,
  "truth": {
    "type": "dttdl",
    "a": [-1.6, 0.8],
    "b": [1.0, -0.5],
    "beta": 7.5,
    "d": 4,
    "nonlinearity": {
      "type": "sampled",
      "c": {"first": -10, "step": 1, "last": 10},
      "function": {"type": "tanh", "amplitude": 2.5, "gain": 1.2}
    },
    "initial": {"type": "gaussian", "mean": 0, "std": 1, "seed": 1002}
  },
  "input": {"type": "gaussian", "mean": 5, "variance": 1.5, "seed": 1001},
  "noise": {"enabled": false, "variance": 1.5, "seed": 1003},
  "identification": {
    "n_hat": 2,
    "d_hat": 4,
    "c_hat": {"first": -10, "step": 1, "last": 10},
    "window": [100, 25000],
    "constant_input": false,
    "beta": 7.5,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e6, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 8},
    "truth_initial": 300,
    "model_initial": 0,
    "samples": 10000,
    "transient": 2000,
    "overlay": [500, 550]
  },
  "sweep": {"n_hat": [1, 2, 3], "d_hat": [3, 4, 5], "noisy": true}
})"},
      {"example2", R"({
  "schema_version": 1,
  "name": "example2",
  "samples": 25001,
  "truth": {
    "type": "dttdl",
    "a": [-2.35, 2.0, -0.6],
    "b": [1.0, -2.3, -1.5725],
    "beta": 5,
    "d": 4,
    "nonlinearity": {"type": "tanh", "amplitude": 2.5, "gain": 1.2, "shift": 3, "offset": 2.2342},
    "initial": {"type": "gaussian", "mean": 0, "std": 1, "seed": 2002}
  },
  "input": {"type": "gaussian", "mean": 4, "variance": 2, "seed": 2001},
  "noise": {"enabled": false, "variance": 2.65, "seed": 2003},
  "identification": {
    "n_hat": 3,
    "d_hat": 4,
    "c_hat": {"first": -10, "step": 1, "last": 10},
    "window": [100, 25000],
    "constant_input": false,
    "beta": 5,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e6, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 8},
    "truth_initial": 500,
    "model_initial": 0,
    "samples": 10000,
    "transient": 2000,
    "overlay": [500, 550]
  },
  "sweep": {"n_hat": [2, 3, 4], "d_hat": [3, 4, 5], "noisy": true}
})"},
      {"example3", R"({
  "schema_version": 1,
  "name": "example3",
  "samples": 100001,
  "truth": {
    "type": "dttdl",
    "a": [-3.5442, 5.21974, -3.9216, 1.5316, -0.2722, -0.02153],
    "b": [0, 0, 0, 1.0, 1.5, 0.8125],
    "beta": 1,
    "d": 0,
    "nonlinearity": {"type": "gaussian_difference", "peak": 4, "sigma": 1.75, "center": 4},
    "initial": {"type": "gaussian", "mean": 0, "std": 1, "seed": 3002}
  },
  "input": {"type": "gaussian", "mean": 3, "variance": 5, "seed": 3001},
  "noise": {"enabled": false, "variance": 2.5, "seed": 3003},
  "identification": {
    "n_hat": 6,
    "d_hat": 0,
    "c_hat": {"first": -10, "step": 1, "last": 10},
    "window": [100, 100000],
    "constant_input": false,
    "beta": 1,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e6, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 2},
    "truth_initial": 500,
    "model_initial": 0,
    "samples": 10000,
    "transient": 2000,
    "overlay": [1000, 1050]
  },
  "sweep": {"n_hat": [4, 5, 6, 7, 8, 9, 10], "d_hat": [0], "noisy": true}
})"},
      {"example4", R"({
  "schema_version": 1,
  "name": "example4",
  "samples": 100001,
  "truth": {
    "type": "cttdl",
    "A": [[-1, -6.5], [1, 0]],
    "B": [1, 0],
    "C": [1, 2.5],
    "tau": 0.001,
    "beta": 50,
    "delay": 0.1,
    "nonlinearity": {"type": "tanh", "amplitude": 5, "gain": 1},
    "step": 0.001,
    "y0": 0,
    "sample_time": 0.1,
    "bias": 0
  },
  "input": {"type": "constant", "value": 2.5},
  "noise": {"enabled": false},
  "identification": {
    "n_hat": 12,
    "d_hat": 5,
    "c_hat": {"first": -6, "step": 0.5, "last": 6},
    "window": [100, 100000],
    "constant_input": true,
    "beta": 5,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e2, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 5},
    "truth_initial": 0,
    "model_initial": 0,
    "samples": 25000,
    "transient": 5000,
    "overlay": [20000, 20100]
  }
})"},
      {"example4-zoh", R"({
  "schema_version": 1,
  "name": "example4-zoh",
  "samples": 100001,
  "truth": {
    "type": "cttdl",
    "A": [[-1, -6.5], [1, 0]],
    "B": [1, 0],
    "C": [1, 2.5],
    "tau": 0.001,
    "beta": 50,
    "delay": 0.1,
    "nonlinearity": {"type": "tanh", "amplitude": 5, "gain": 1},
    "step": 0.001,
    "y0": 0,
    "sample_time": 0.1,
    "bias": 0
  },
  "input": {"type": "zoh_gaussian", "mean": 2.5, "variance": 0.5, "seed": 4001},
  "noise": {"enabled": false, "variance": 2, "seed": 4003},
  "identification": {
    "n_hat": 12,
    "d_hat": 4,
    "c_hat": {"first": -12.5, "step": 2.5, "last": 12.5},
    "window": [100, 100000],
    "constant_input": false,
    "beta": 25,
    "beta_noisy": 15,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e2, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 5},
    "truth_initial": 0,
    "model_initial": 0,
    "samples": 10000,
    "transient": 2000,
    "overlay": [2000, 2100]
  }
})"},
      {"example5", R"({
  "schema_version": 1,
  "name": "example5",
  "samples": 20001,
  "truth": {
    "type": "van_der_pol",
    "mu0": 1,
    "state0": [0.1, 0],
    "sample_time": 0.1,
    "steps_per_sample": 160,
    "bias": 10
  },
  "input": {"type": "constant", "value": 1},
  "noise": {"enabled": false},
  "identification": {
    "n_hat": 12,
    "d_hat": 19,
    "c_hat": {"first": -0.3, "step": 0.025, "last": 0.3},
    "window": [225, 20000],
    "constant_input": true,
    "beta": -5,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e2, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 1},
    "model_initial": 0,
    "samples": 20001,
    "transient": 2000,
    "overlay": [555, 625],
    "phase_portrait": true
  }
})"},
      {"example6", R"({
  "schema_version": 1,
  "name": "example6",
  "samples": 10001,
  "truth": {
    "type": "lotka_volterra",
    "zeta": 0.6666666666666666,
    "rho": 1.3333333333333333,
    "xi": 1,
    "phi": 1,
    "state0": [1, 1],
    "sample_time": 0.1,
    "steps_per_sample": 160,
    "bias": 0
  },
  "input": {"type": "constant", "value": 1},
  "noise": {"enabled": false},
  "identification": {
    "n_hat": 12,
    "d_hat": 13,
    "c_hat": {"first": -0.08, "step": 0.01, "last": 0.06},
    "window": [500, 10000],
    "constant_input": true,
    "beta": -5,
    "solver": {"type": "rls", "theta0": 0, "P0": 1e2, "lambda": 1}
  },
  "validation": {
    "input": {"type": "constant", "value": 1},
    "model_initial": 0,
    "samples": 10001,
    "transient": 2000,
    "overlay": [2000, 2200],
    "phase_portrait": true
  }
})"},
  };
  return table;
}

// ---------------------------------------------------------------------------------------------
// Simulation helpers

std::vector<double> discrete_input(const InputSpec& in, std::size_t length) {
  if (in.kind == InputSpec::Kind::constant) return constant_sequence(length, in.mean);
  return gaussian_sequence(length, in.mean, in.std, in.seed);
}

InputSignal continuous_input(const InputSpec& in, double Ts, std::size_t samples) {
  if (in.kind == InputSpec::Kind::constant) return InputSignal::constant(in.mean);
  if (in.kind == InputSpec::Kind::zoh_gaussian) {
    return PiecewiseConstantInput(in.seed, in.mean, in.std, Ts, samples + 1).signal();
  }
  throw ConfigError("config field input.type: continuous truths take constant or zoh_gaussian");
}

TruthRun run_truth(const ExperimentConfig& config, const InputSpec& input, std::size_t samples,
                   std::optional<double> initial) {
  const TruthSpec& t = config.truth;
  TruthRun out;
  if (samples < 2) throw ConfigError("config field samples: need at least two samples");
  const double t_end = static_cast<double>(samples - 1) * t.sample_time;
  switch (t.kind) {
    case TruthSpec::Kind::dttdl: {
      out.record.sample_time = t.sample_time;
      out.record.v = discrete_input(input, samples);
      std::vector<double> y0;
      if (initial) {
        y0 = constant_sequence(t.dttdl.history_length(), *initial);
      } else if (t.initial.random) {
        y0 = gaussian_sequence(t.dttdl.history_length(), t.initial.value, t.initial.std,
                               t.initial.seed);
      } else {
        y0 = constant_sequence(t.dttdl.history_length(), t.initial.value);
      }
      if (samples < y0.size()) throw ConfigError("config field samples: shorter than the history");
      out.record.y = simulate(t.dttdl, out.record.v, y0);
      return out;
    }
    case TruthSpec::Kind::cttdl: {
      const InputSignal v = continuous_input(input, t.sample_time, samples);
      out.trajectory = integrate_dde(t.cttdl, v, initial.value_or(t.y0), t_end, t.step,
                                     DelayInterpolation::hermite, t.steps_per_sample);
      out.record = sample(*out.trajectory, t.sample_time, t.bias, v.value);
      return out;
    }
    case TruthSpec::Kind::van_der_pol:
    case TruthSpec::Kind::lotka_volterra: {
      const OdeSystem sys = t.kind == TruthSpec::Kind::van_der_pol
                                ? van_der_pol(t.mu0)
                                : lotka_volterra(t.zeta, t.rho, t.xi, t.phi);
      const Eigen::Vector2d s0(t.state0[0], t.state0[1]);
      const double h = t.sample_time / static_cast<double>(t.steps_per_sample);
      out.trajectory = integrate_ode(sys, s0, t_end, h, t.steps_per_sample);
      const double value = input.mean;
      out.record = sample(*out.trajectory, t.sample_time, t.bias, [value](double) { return value; });
      return out;
    }
  }
  throw ConfigError("config field truth.type: unsupported");
}

// ---------------------------------------------------------------------------------------------
// Output

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  template <class F>
  void csv(const std::string& name, F&& body) {
    std::ostringstream out;
    body(out);
    text(name, out.str());
  }

  void text(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::filesystem::create_directories(path.parent_path());
    io::write_text_file(path, content);
    files_.push_back(name);
  }

  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  json files() const {
    auto sorted = files_;
    std::sort(sorted.begin(), sorted.end());
    return sorted;
  }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_two_series(std::ostream& out, const char* a_name, std::span<const double> a,
                      const char* b_name, std::span<const double> b) {
  out << "k," << a_name << ',' << b_name << '\n';
  const std::size_t n = std::max(a.size(), b.size());
  for (std::size_t k = 0; k < n; ++k) {
    out << k << ',' << (k < a.size() ? io::format_double(a[k]) : "") << ','
        << (k < b.size() ? io::format_double(b[k]) : "") << '\n';
  }
}

PsdEstimate tail_psd(const ExperimentConfig& config, std::span<const double> y) {
  const std::size_t start = std::min(config.validation.transient, y.size());
  const auto tail = y.subspan(start);
  return psd(tail, config.truth.sample_time, fitting_segment_length(tail.size()));
}

json identification_summary(const IdentificationSettings& s, const IdentifiedModel& m) {
  json j = io::to_json(m).at("diagnostics");
  j["n_hat"] = s.n_hat;
  j["d_hat"] = s.d_hat;
  j["window"] = {s.lower, s.upper};
  j["constant_input"] = s.constant_input;
  j["solver"] = std::holds_alternative<BatchSolver>(s.solver) ? "batch" : "rls";
  j["bound_holds"] = m.diagnostics.bound_holds();
  return j;
}

json seeds(const ExperimentConfig& c) {
  json j = json::object();
  if (c.input.kind != InputSpec::Kind::constant) j["input"] = c.input.seed;
  if (c.truth.kind == TruthSpec::Kind::dttdl && c.truth.initial.random) {
    j["initial"] = c.truth.initial.seed;
  }
  if (c.noise.enabled) j["noise"] = c.noise.seed;
  if (c.validation.input.kind != InputSpec::Kind::constant) {
    j["validation_input"] = c.validation.input.seed;
  }
  return j;
}

json libraries() {
  return json{{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"fftw", std::string(fftw_version)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

struct Measured {
  TruthRun truth;
  NoisyRecord measured;
};

Measured acquire(const ExperimentConfig& config, ArtifactWriter& out, json& manifest) {
  Measured m;
  m.truth = simulate_truth(config);
  m.measured = measure(m.truth.record, config.noise);
  out.csv("record.csv", [&](std::ostream& s) { io::write_record_csv(s, m.measured.record); });
  if (config.noise.enabled) {
    out.csv("record_clean.csv", [&](std::ostream& s) { io::write_record_csv(s, m.truth.record); });
  }
  if (m.truth.trajectory) {
    out.csv("trajectory.csv",
            [&](std::ostream& s) { io::write_trajectory_csv(s, *m.truth.trajectory); });
  }
  manifest["record"] = json{{"samples", m.measured.record.size()},
                            {"sample_time", m.measured.record.sample_time},
                            {"noise_std", m.measured.noise_std},
                            {"achieved_snr_db", finite_or_null(m.measured.achieved_snr_db)}};
  return m;
}

IdentifiedModel identify_stage(const ExperimentConfig& config, const SignalRecord& record,
                               ArtifactWriter& out, json& manifest) {
  const auto settings = identification_settings(config, record.size(), config.noise.enabled);
  IdentifiedModel model = identify(record, settings);
  out.json_file("model.json", io::to_json(model));
  manifest["identification"] = identification_summary(settings, model);
  return model;
}

void validate_stage(const ExperimentConfig& config, const DttdlModel& model, ArtifactWriter& out,
                    json& manifest) {
  const TruthRun truth = validation_truth(config);
  const std::vector<double> response = model_response(config, model);
  const ValidationReport report = compare(config, truth.record.y, response);
  out.csv("validation.csv", [&](std::ostream& s) {
    write_two_series(s, "truth", truth.record.y, "model", response);
  });
  const auto truth_psd = tail_psd(config, truth.record.y);
  out.csv("psd_truth.csv", [&](std::ostream& s) { io::write_psd_csv(s, truth_psd); });
  if (report.error.empty()) {
    const auto model_psd = tail_psd(config, response);
    out.csv("psd_model.csv", [&](std::ostream& s) { io::write_psd_csv(s, model_psd); });
  }
  const double Ts = config.truth.sample_time;
  out.csv("frequency_response_model.csv", [&](std::ostream& s) {
    io::write_frequency_response_csv(s, frequency_response(model.a, model.b, Ts));
  });
  if (config.truth.kind == TruthSpec::Kind::dttdl) {
    out.csv("frequency_response_truth.csv", [&](std::ostream& s) {
      io::write_frequency_response_csv(
          s, frequency_response(config.truth.dttdl.a, config.truth.dttdl.b, Ts));
    });
  }
  if (config.validation.overlay) {
    const auto [lo, hi] = *config.validation.overlay;
    out.csv("overlay.csv", [&](std::ostream& s) {
      s << "k,truth,model_k,model\n";
      for (std::size_t k = lo; k <= hi && k < truth.record.size(); ++k) {
        const long mk = static_cast<long>(k) + report.alignment_shift;
        s << k << ',' << io::format_double(truth.record.y[k]) << ',' << mk << ',';
        if (mk >= 0 && static_cast<std::size_t>(mk) < response.size()) {
          s << io::format_double(response[static_cast<std::size_t>(mk)]);
        }
        s << '\n';
      }
    });
  }
  if (config.validation.phase_portrait) {
    const std::size_t start = std::min(config.validation.transient, truth.record.size());
    const auto tail = [start](std::span<const double> y) { return y.subspan(std::min(start, y.size())); };
    out.csv("phase_truth.csv", [&](std::ostream& s) {
      io::write_phase_csv(s, phase_portrait(tail(truth.record.y), Ts));
    });
    out.csv("phase_model.csv", [&](std::ostream& s) {
      io::write_phase_csv(s, phase_portrait(tail(response), Ts));
    });
  }
  manifest["validation"] = to_json(report);
}

void run_sweep(const ExperimentConfig& base, ArtifactWriter& out, json& manifest) {
  if (!base.sweep) throw ConfigError("config field sweep: is required for the sweep command");
  ExperimentConfig config = base;
  config.noise.enabled = base.sweep->noisy && (base.noise.std || base.noise.snr_db);
  if (config.noise.enabled) manifest["seeds"]["noise"] = config.noise.seed;
  const Measured data = acquire(config, out, manifest);
  const TruthRun truth = validation_truth(config);
  const auto truth_psd = tail_psd(config, truth.record.y);
  out.csv("psd_truth.csv", [&](std::ostream& s) { io::write_psd_csv(s, truth_psd); });
  out.csv("validation_truth.csv", [&](std::ostream& s) { io::write_series_csv(s, truth.record.y); });

  struct Cell {
    std::size_t n_hat, d_hat;
    json summary;
    std::string psd_csv, model_json, series_csv;
  };
  std::vector<Cell> cells;
  for (std::size_t n : config.sweep->n_hat)
    for (std::size_t d : config.sweep->d_hat) cells.push_back(Cell{n, d, {}, {}, {}, {}});

  const auto count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Cell& cell = cells[static_cast<std::size_t>(i)];
    cell.summary = json{{"n_hat", cell.n_hat}, {"d_hat", cell.d_hat}};
    try {
      ExperimentConfig local = config;
      local.identification.n_hat = cell.n_hat;
      local.identification.d_hat = cell.d_hat;
      const auto settings =
          identification_settings(local, data.measured.record.size(), local.noise.enabled);
      const IdentifiedModel model = identify(data.measured.record, settings);
      cell.model_json = io::to_json(model).dump(2) + "\n";
      cell.summary["identification"] = identification_summary(settings, model);
      const auto response = model_response(local, model.model);
      std::ostringstream series;
      io::write_series_csv(series, response);
      cell.series_csv = series.str();
      const ValidationReport report = compare(local, truth.record.y, response);
      cell.summary["validation"] = to_json(report);
      if (report.error.empty()) {
        std::ostringstream p;
        io::write_psd_csv(p, tail_psd(local, response));
        cell.psd_csv = p.str();
      }
      cell.summary["status"] = "ok";
    } catch (const std::exception& e) {
      cell.summary["status"] = "failed";
      cell.summary["error"] = e.what();
    }
  }

  std::ostringstream table;
  table << "n_hat,d_hat,status,J_LS,J,truth_frequency,model_frequency,bin_difference\n";
  json summaries = json::array();
  for (const Cell& cell : cells) {
    const std::string dir = "n" + std::to_string(cell.n_hat) + "_d" + std::to_string(cell.d_hat);
    if (!cell.model_json.empty()) out.text(dir + "/model.json", cell.model_json);
    if (!cell.series_csv.empty()) out.text(dir + "/validation_model.csv", cell.series_csv);
    if (!cell.psd_csv.empty()) out.text(dir + "/psd_model.csv", cell.psd_csv);
    const json& s = cell.summary;
    table << cell.n_hat << ',' << cell.d_hat << ',' << s.at("status").get<std::string>();
    if (s.contains("validation")) {
      const json& id = s.at("identification");
      const json& v = s.at("validation");
      table << ',' << io::format_double(id.at("J_LS").get<double>()) << ','
            << io::format_double(id.at("J").get<double>()) << ','
            << io::format_double(v.at("truth_frequency").get<double>()) << ','
            << io::format_double(v.at("model_frequency").get<double>()) << ','
            << v.at("bin_difference").get<long>();
    } else {
      table << ",,,,,";
    }
    table << '\n';
    summaries.push_back(s);
  }
  out.text("sweep.csv", table.str());
  manifest["sweep"] = summaries;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto version = unsigned_integer(j, "", "schema_version");
  if (version != static_cast<std::uint64_t>(kSchemaVersion)) {
    fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                               std::to_string(kSchemaVersion) + ")");
  }
  c.source = j;
  c.name = j.contains("name") ? string_field(j, "", "name") : std::string("experiment");
  c.samples = size_field(j, "", "samples");
  c.truth = parse_truth(field(j, "", "truth"), "truth");
  c.input = parse_input(field(j, "", "input"), "input");
  if (c.truth.kind != TruthSpec::Kind::dttdl && c.truth.kind != TruthSpec::Kind::cttdl &&
      c.input.kind != InputSpec::Kind::constant) {
    fail("input.type", "autonomous truths take a constant input");
  }
  if (c.samples <= history_length(c.truth)) fail("samples", "shorter than the initial history");

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    c.noise.enabled = boolean_or(n, "noise", "enabled", true);
    c.noise.std = spread(n, "noise");
    if (n.contains("snr_db")) {
      if (c.noise.std) fail("noise", "give either a spread or snr_db, not both");
      c.noise.snr_db = number(n, "noise", "snr_db");
    }
    if (c.noise.enabled && !c.noise.std && !c.noise.snr_db) {
      fail("noise", "enabled noise needs std, variance or snr_db");
    }
    if (c.noise.std || c.noise.snr_db) c.noise.seed = unsigned_integer(n, "noise", "seed");
  }

  const std::string ip = "identification";
  const json& id = field(j, "", "identification");
  auto& s = c.identification;
  s.n_hat = size_field(id, ip, "n_hat");
  s.d_hat = size_field(id, ip, "d_hat");
  if (s.n_hat == 0) fail(join(ip, "n_hat"), "must be at least 1");
  s.c_hat = grid(field(id, ip, "c_hat"), join(ip, "c_hat"));
  rethrow_as_config(join(ip, "c_hat"), [&] { return CplPartition::zero_anchored(s.c_hat); });
  const json& window = field(id, ip, "window");
  const auto w = size_array(window, join(ip, "window"));
  if (w.size() != 2 || w[1] < w[0]) fail(join(ip, "window"), "must be [lower, upper], lower <= upper");
  s.lower = w[0];
  s.upper = w[1];
  s.constant_input = boolean_or(id, ip, "constant_input", false);
  s.beta = number(id, ip, "beta");
  if (s.beta == 0.0) fail(join(ip, "beta"), "must be nonzero");
  if (id.contains("beta_noisy")) {
    c.beta_noisy = number(id, ip, "beta_noisy");
    if (*c.beta_noisy == 0.0) fail(join(ip, "beta_noisy"), "must be nonzero");
  }
  s.solver = parse_solver(field(id, ip, "solver"), join(ip, "solver"));
  if (s.constant_input && c.input.kind != InputSpec::Kind::constant) {
    fail(join(ip, "constant_input"), "requires a constant input");
  }

  const std::string vp = "validation";
  const json& val = field(j, "", "validation");
  c.validation.input = parse_input(field(val, vp, "input"), join(vp, "input"));
  c.validation.truth_initial = number_or(val, vp, "truth_initial", 0.0);
  c.validation.model_initial = number_or(val, vp, "model_initial", 0.0);
  c.validation.samples = size_field(val, vp, "samples");
  c.validation.transient = val.contains("transient") ? size_field(val, vp, "transient") : 0;
  if (c.validation.samples < c.validation.transient + 64) {
    fail(join(vp, "samples"), "leaves fewer than 64 samples after the transient");
  }
  if (val.contains("overlay")) {
    const auto o = size_array(val.at("overlay"), join(vp, "overlay"));
    if (o.size() != 2 || o[1] < o[0]) fail(join(vp, "overlay"), "must be [first, last]");
    c.validation.overlay = std::array<std::size_t, 2>{o[0], o[1]};
  }
  c.validation.phase_portrait = boolean_or(val, vp, "phase_portrait", false);

  if (j.contains("sweep")) {
    const json& sw = j.at("sweep");
    SweepSpec spec;
    spec.n_hat = size_array(field(sw, "sweep", "n_hat"), "sweep.n_hat");
    spec.d_hat = size_array(field(sw, "sweep", "d_hat"), "sweep.d_hat");
    spec.noisy = boolean_or(sw, "sweep", "noisy", true);
    for (std::size_t n : spec.n_hat) {
      if (n == 0) fail("sweep.n_hat", "entries must be at least 1");
    }
    c.sweep = spec;
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_json_file(path));
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : preset_table()) names.push_back(name);
  return names;
}

json preset(const std::string& name) {
  const auto& table = preset_table();
  const auto it = table.find(name);
  if (it == table.end()) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset \"" + name + "\" (known: " + known + ")");
  }
  return json::parse(it->second);
}

json apply_overrides(json config, const Overrides& o) {
  if (o.noisy) {
    if (!config.contains("noise") || !config["noise"].is_object()) {
      if (*o.noisy) throw ConfigError("config field noise: --noisy needs a noise section");
      config["noise"] = json::object();
    }
    config["noise"]["enabled"] = *o.noisy;
    if (config.contains("sweep") && config["sweep"].is_object()) {
      config["sweep"]["noisy"] = *o.noisy;
    }
  }
  if (o.samples) {
    config["samples"] = *o.samples;
    if (config.contains("identification") && config["identification"].contains("window")) {
      json& w = config["identification"]["window"];
      if (w.is_array() && w.size() == 2 && w[1].is_number_integer() &&
          w[1].get<long long>() + 1 > static_cast<long long>(*o.samples)) {
        w[1] = *o.samples == 0 ? 0 : *o.samples - 1;
      }
    }
  }
  if (o.seed) {
    const std::uint64_t s = *o.seed;
    if (config.contains("input") && config["input"].contains("seed")) config["input"]["seed"] = s;
    if (config.contains("truth") && config["truth"].contains("initial") &&
        config["truth"]["initial"].contains("seed")) {
      config["truth"]["initial"]["seed"] = s + 1;
    }
    if (config.contains("noise") && config["noise"].contains("seed")) {
      config["noise"]["seed"] = s + 2;
    }
  }
  if (o.n_hat) config["identification"]["n_hat"] = *o.n_hat;
  if (o.d_hat) config["identification"]["d_hat"] = *o.d_hat;
  return config;
}

std::string config_hash(const json& config) {
  const std::string text = config.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

TruthRun simulate_truth(const ExperimentConfig& config) {
  return run_truth(config, config.input, config.samples, std::nullopt);
}

TruthRun validation_truth(const ExperimentConfig& config) {
  const bool autonomous = config.truth.kind == TruthSpec::Kind::van_der_pol ||
                          config.truth.kind == TruthSpec::Kind::lotka_volterra;
  return run_truth(config, config.validation.input, config.validation.samples,
                   autonomous ? std::nullopt : std::optional<double>(config.validation.truth_initial));
}

NoisyRecord measure(const SignalRecord& clean, const NoiseSpec& noise) {
  if (!noise.enabled) return add_noise_std(clean, 0.0, 0);
  if (noise.std) return add_noise_std(clean, *noise.std, noise.seed);
  return add_noise(clean, *noise.snr_db, noise.seed);
}

IdentificationSettings identification_settings(const ExperimentConfig& config,
                                               std::size_t record_length, bool noisy) {
  IdentificationSettings s = config.identification;
  s.beta = config.effective_beta(noisy);
  if (record_length == 0 || s.lower >= record_length) {
    throw ConfigError("config field identification.window: starts beyond the record (" +
                      std::to_string(record_length) + " samples)");
  }
  s.upper = std::min(s.upper, record_length - 1);
  return s;
}

std::vector<double> model_response(const ExperimentConfig& config, const DttdlModel& model) {
  const auto v = discrete_input(config.validation.input, config.validation.samples);
  if (v.size() < model.history_length()) {
    throw ConfigError("config field validation.samples: shorter than the model history");
  }
  return simulate(model, v, constant_sequence(model.history_length(), config.validation.model_initial));
}

ValidationReport compare(const ExperimentConfig& config, std::span<const double> truth,
                         std::span<const double> model) {
  ValidationReport r;
  const std::size_t start = std::min(config.validation.transient, truth.size());
  const auto t_tail = truth.subspan(start);
  const auto m_tail = model.subspan(std::min(start, model.size()));
  const double Ts = config.truth.sample_time;
  const std::size_t seg = fitting_segment_length(std::min(t_tail.size(), m_tail.size()));
  const auto tp = psd(t_tail, Ts, seg);
  const std::size_t t_bin = dominant_bin(tp);
  r.truth_frequency = tp.frequency[t_bin];
  r.bin_width = tp.bin_width();

  double scale = 1.0;
  double t_lo = t_tail[0], t_hi = t_tail[0];
  for (double y : t_tail) {
    scale = std::max(scale, std::abs(y));
    t_lo = std::min(t_lo, y);
    t_hi = std::max(t_hi, y);
  }
  r.model_oscillates = is_bounded_oscillation(m_tail, 1e3 * scale, 1e-6 * std::max(1.0, t_hi - t_lo));
  r.range_overlap = range_overlap(t_tail, m_tail);
  try {
    const auto mp = psd(m_tail, Ts, seg);
    const std::size_t m_bin = dominant_bin(mp);
    r.model_frequency = mp.frequency[m_bin];
    r.bin_difference = std::labs(static_cast<long>(m_bin) - static_cast<long>(t_bin));
  } catch (const DomainError& e) {
    r.error = std::string("model response: ") + e.what();
    return r;
  }
  const double period = 1.0 / (r.truth_frequency * Ts);
  const int max_shift = static_cast<int>(std::clamp(std::ceil(period), 1.0,
                                                    static_cast<double>(t_tail.size() / 4)));
  r.alignment_shift = best_alignment_shift(t_tail, m_tail, max_shift);
  if (config.validation.phase_portrait && r.model_frequency > 0.0) {
    const auto portrait = phase_portrait(m_tail, Ts);
    const auto model_period =
        static_cast<std::size_t>(std::llround(1.0 / (r.model_frequency * Ts)));
    if (model_period >= 2 && 2 * model_period < portrait.size()) {
      r.closure_gap = closure_gap(portrait, 0, model_period);
    }
  }
  return r;
}

json to_json(const ValidationReport& r) {
  json j{{"truth_frequency", r.truth_frequency},
         {"model_frequency", r.model_frequency},
         {"bin_width", r.bin_width},
         {"bin_difference", r.bin_difference},
         {"model_oscillates", r.model_oscillates},
         {"alignment_shift", r.alignment_shift},
         {"range_overlap", r.range_overlap}};
  if (r.closure_gap) j["closure_gap"] = *r.closure_gap;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::string to_string(Command command) {
  switch (command) {
    case Command::run: return "run";
    case Command::simulate: return "simulate";
    case Command::identify: return "identify";
    case Command::validate: return "validate";
    case Command::sweep: return "sweep";
  }
  return "unknown";
}

json execute(const RunRequest& request, const std::filesystem::path& out_dir) {
  const ExperimentConfig config = parse_config(request.config);
  ArtifactWriter out(out_dir);
  json manifest{{"tool", "sesid"},
                {"version", SESID_VERSION},
                {"schema_version", kSchemaVersion},
                {"command", to_string(request.command)},
                {"preset", request.preset ? json(*request.preset) : json(nullptr)},
                {"name", config.name},
                {"config_sha256", config_hash(request.config)},
                {"seeds", seeds(config)},
                {"libraries", libraries()}};
  out.json_file("config.json", request.config);

  switch (request.command) {
    case Command::simulate:
      acquire(config, out, manifest);
      break;
    case Command::identify: {
      if (request.record_csv) {
        std::ifstream in(*request.record_csv);
        if (!in) throw ConfigError("cannot open record " + request.record_csv->string());
        const SignalRecord rec = io::read_record_csv(in, config.truth.sample_time);
        manifest["record"] = json{{"samples", rec.size()}, {"source", request.record_csv->filename().string()}};
        identify_stage(config, rec, out, manifest);
      } else {
        const Measured data = acquire(config, out, manifest);
        identify_stage(config, data.measured.record, out, manifest);
      }
      break;
    }
    case Command::validate: {
      DttdlModel model;
      if (request.model_json) {
        model = io::model_from_json(io::read_json_file(*request.model_json));
      } else {
        const Measured data = acquire(config, out, manifest);
        model = identify_stage(config, data.measured.record, out, manifest).model;
      }
      validate_stage(config, model, out, manifest);
      break;
    }
    case Command::run: {
      const Measured data = acquire(config, out, manifest);
      const IdentifiedModel model = identify_stage(config, data.measured.record, out, manifest);
      validate_stage(config, model.model, out, manifest);
      break;
    }
    case Command::sweep:
      run_sweep(config, out, manifest);
      break;
  }
  manifest["files"] = out.files();
  io::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::filesystem::path timestamped_directory(const std::filesystem::path& root,
                                            const std::string& name) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  std::filesystem::path dir = root / (name + "-" + stamp);
  for (int i = 1; std::filesystem::exists(dir); ++i) {
    dir = root / (name + "-" + stamp + "-" + std::to_string(i));
  }
  return dir;
}

}  // namespace sesid::experiment
