#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sesid/analysis.hpp"
#include "sesid/ctsim.hpp"
#include "sesid/estimator.hpp"
#include "sesid/lure.hpp"

namespace sesid::io {

using json = nlohmann::json;

// {"c": [...], "mu": [...], "r": 1-based anchor, "kappa": value}
json to_json(const CplFunction& f);
CplFunction cpl_from_json(const json& j);

// CPL objects as above; smooth maps carry a "type" of "tanh" or "gaussian_difference".
json to_json(const Nonlinearity& f);
Nonlinearity nonlinearity_from_json(const json& j);

// {"a": [...], "b": [...], "beta": ..., "d": ..., "nonlinearity": {...}}
json to_json(const DttdlModel& model);
DttdlModel model_from_json(const json& j);

// Model fields plus "diagnostics": {J_LS, J_A, sigma_max_Phi_etaY, rank, path, ...}.
json to_json(const IdentifiedModel& model);

// Shortest decimal that reads back to the same double.
std::string format_double(double x);

// CSV with header `k,v,y`.
void write_record_csv(std::ostream& out, const SignalRecord& record);
SignalRecord read_record_csv(std::istream& in, double sample_time = 1.0);

// `t,x1..xn,y`
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
// `freq,power`
void write_psd_csv(std::ostream& out, const PsdEstimate& estimate);
// `y,ydot`
void write_phase_csv(std::ostream& out, const std::vector<std::pair<double, double>>& portrait);
// `omega,mag_db,phase_rad`
void write_frequency_response_csv(std::ostream& out, const FrequencyResponse& response);
// `k,y`
void write_series_csv(std::ostream& out, std::span<const double> y);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace sesid::io
