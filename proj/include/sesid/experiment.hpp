#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sesid/analysis.hpp"
#include "sesid/ctsim.hpp"
#include "sesid/estimator.hpp"
#include "sesid/lure.hpp"

namespace sesid::experiment {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct InputSpec {
  enum class Kind { constant, gaussian, zoh_gaussian };
  Kind kind = Kind::constant;
  double mean = 0.0;  // the value of a constant input
  double std = 0.0;
  std::uint64_t seed = 0;
};

// Output history y_0 .. y_{n+d} of a discrete truth system.
struct InitialHistory {
  bool random = false;
  double value = 0.0;  // constant value, or the mean of the random draws
  double std = 1.0;
  std::uint64_t seed = 0;
};

struct TruthSpec {
  enum class Kind { dttdl, cttdl, van_der_pol, lotka_volterra };
  Kind kind = Kind::dttdl;

  DttdlModel dttdl;
  InitialHistory initial;

  CttdlSystem cttdl;
  double step = 1e-3;
  double y0 = 0.0;

  double mu0 = 1.0;
  double zeta = 0.0, rho = 0.0, xi = 0.0, phi = 0.0;
  std::vector<double> state0;
  std::size_t steps_per_sample = 160;

  double sample_time = 1.0;
  double bias = 0.0;
};

struct NoiseSpec {
  bool enabled = false;
  std::optional<double> std;
  std::optional<double> snr_db;
  std::uint64_t seed = 0;
};

struct ValidationSpec {
  InputSpec input;
  double truth_initial = 0.0;
  double model_initial = 0.0;
  std::size_t samples = 5000;
  std::size_t transient = 0;                 // samples skipped before spectra and metrics
  std::optional<std::array<std::size_t, 2>> overlay;  // truth window written next to the model
  bool phase_portrait = false;
};

struct SweepSpec {
  std::vector<std::size_t> n_hat;
  std::vector<std::size_t> d_hat;
  bool noisy = true;
};

struct ExperimentConfig {
  std::string name;
  std::size_t samples = 0;
  TruthSpec truth;
  InputSpec input;
  NoiseSpec noise;
  IdentificationSettings identification;
  std::optional<double> beta_noisy;  // replaces identification.beta when noise is enabled
  ValidationSpec validation;
  std::optional<SweepSpec> sweep;
  json source;  // the JSON the config was parsed from

  double effective_beta(bool noisy) const {
    return noisy && beta_noisy ? *beta_noisy : identification.beta;
  }
};

// Field-addressed ConfigError on any schema violation.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> preset_names();
// Embedded preset config; ConfigError for an unknown name.
json preset(const std::string& name);

struct Overrides {
  std::optional<bool> noisy;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_hat;
  std::optional<std::size_t> d_hat;
};

// Applies command-line overrides to a config document. A master seed replaces the input,
// initial-history and noise seeds with seed, seed + 1 and seed + 2.
json apply_overrides(json config, const Overrides& overrides);

// SHA-256 of the compact JSON dump, lowercase hex.
std::string config_hash(const json& config);

struct TruthRun {
  SignalRecord record;                    // noiseless
  std::optional<Trajectory> trajectory;   // continuous truths, one node per sample
};

TruthRun simulate_truth(const ExperimentConfig& config);
// Truth response under the validation input, `validation.samples` long.
TruthRun validation_truth(const ExperimentConfig& config);
NoisyRecord measure(const SignalRecord& clean, const NoiseSpec& noise);

IdentificationSettings identification_settings(const ExperimentConfig& config,
                                               std::size_t record_length, bool noisy);

// Identified model driven by the validation input from the configured initial value.
std::vector<double> model_response(const ExperimentConfig& config, const DttdlModel& model);

struct ValidationReport {
  double truth_frequency = 0.0;
  double model_frequency = 0.0;
  double bin_width = 0.0;
  long bin_difference = 0;
  bool model_oscillates = false;
  int alignment_shift = 0;
  double range_overlap = 0.0;
  std::optional<double> closure_gap;
  std::string error;  // nonempty when the model response could not be analysed
};

ValidationReport compare(const ExperimentConfig& config, std::span<const double> truth,
                         std::span<const double> model);

json to_json(const ValidationReport& report);

enum class Command { run, simulate, identify, validate, sweep };
std::string to_string(Command command);

struct RunRequest {
  Command command = Command::run;
  json config;
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> record_csv;  // identify: use this record
  std::optional<std::filesystem::path> model_json;  // validate: use this model
};

// Runs the command and writes every artifact directly into `out_dir` (created if needed).
// Returns the manifest that was written as manifest.json.
json execute(const RunRequest& request, const std::filesystem::path& out_dir);

// `<root>/<name>-<YYYYmmdd-HHMMSS>`, with a numeric suffix when that directory exists.
std::filesystem::path timestamped_directory(const std::filesystem::path& root,
                                            const std::string& name);

}  // namespace sesid::experiment
