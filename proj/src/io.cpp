#include "sesid/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sesid/error.hpp"

namespace sesid::io {

namespace {

std::vector<double> doubles(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw ConfigError(std::string("missing array field \"") + field + "\"");
  }
  std::vector<double> out;
  for (const auto& x : j.at(field)) {
    if (!x.is_number()) {
      throw ConfigError(std::string("field \"") + field + "\" must hold numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

double number(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number()) {
    throw ConfigError(std::string("missing numeric field \"") + field + "\"");
  }
  return j.at(field).get<double>();
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

json to_json(const CplFunction& f) {
  const auto c = f.breakpoints();
  const auto mu = f.slopes();
  return json{{"c", std::vector<double>(c.begin(), c.end())},
              {"mu", std::vector<double>(mu.begin(), mu.end())},
              {"r", f.anchor() + 1},
              {"kappa", f.kappa()}};
}

CplFunction cpl_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("CPL function must be a JSON object");
  }
  if (!j.contains("r") || !j.at("r").is_number_integer() || j.at("r").get<long long>() < 1) {
    throw ConfigError("CPL field \"r\" must be an integer >= 1");
  }
  const auto r = static_cast<std::size_t>(j.at("r").get<long long>());
  try {
    return CplFunction(doubles(j, "c"), doubles(j, "mu"), r - 1, number(j, "kappa"));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid CPL function: ") + e.what());
  }
}

json to_json(const Nonlinearity& f) {
  struct Visitor {
    json operator()(const CplFunction& g) const { return to_json(g); }
    json operator()(const TanhMap& g) const {
      return json{{"type", "tanh"},
                  {"amplitude", g.amplitude},
                  {"gain", g.gain},
                  {"shift", g.shift},
                  {"offset", g.offset}};
    }
    json operator()(const GaussianDifferenceMap& g) const {
      return json{{"type", "gaussian_difference"},
                  {"peak", g.peak},
                  {"sigma", g.sigma},
                  {"center", g.center}};
    }
  };
  return std::visit(Visitor{}, f);
}

Nonlinearity nonlinearity_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("nonlinearity must be a JSON object");
  }
  const std::string type = j.value("type", std::string("cpl"));
  if (type == "cpl") {
    return cpl_from_json(j);
  }
  if (type == "tanh") {
    return TanhMap{number(j, "amplitude"), number(j, "gain"), j.value("shift", 0.0),
                   j.value("offset", 0.0)};
  }
  if (type == "gaussian_difference") {
    return GaussianDifferenceMap{number(j, "peak"), number(j, "sigma"), number(j, "center")};
  }
  throw ConfigError("unknown nonlinearity type \"" + type + "\"");
}

json to_json(const DttdlModel& model) {
  return json{{"a", model.a},
              {"b", model.b},
              {"beta", model.beta},
              {"d", model.d},
              {"nonlinearity", to_json(model.nonlinearity)}};
}

DttdlModel model_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("model must be a JSON object");
  }
  DttdlModel model;
  model.a = doubles(j, "a");
  model.b = doubles(j, "b");
  model.beta = number(j, "beta");
  if (!j.contains("d") || !j.at("d").is_number_integer() || j.at("d").get<long long>() < 0) {
    throw ConfigError("model field \"d\" must be a nonnegative integer");
  }
  model.d = static_cast<std::size_t>(j.at("d").get<long long>());
  if (!j.contains("nonlinearity")) {
    throw ConfigError("model is missing \"nonlinearity\"");
  }
  model.nonlinearity = nonlinearity_from_json(j.at("nonlinearity"));
  try {
    model.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return model;
}

json to_json(const IdentifiedModel& model) {
  json j = to_json(model.model);
  const auto& d = model.diagnostics;
  j["diagnostics"] = json{{"J_LS", d.J_LS},
                          {"J_A", d.J_A},
                          {"J", d.J},
                          {"sigma_max_Phi_etaY", d.sigma_max_phi_eta},
                          {"rank", d.rank},
                          {"num_parameters", d.num_parameters},
                          {"rank_deficient", d.rank_deficient},
                          {"ambiguous_factorization", d.ambiguous_factorization},
                          {"path", to_string(model.path)},
                          {"beta_choice", model.beta_choice}};
  return j;
}

void write_record_csv(std::ostream& out, const SignalRecord& record) {
  out << "k,v,y\n";
  for (std::size_t k = 0; k < record.size(); ++k) {
    out << k << ',' << format_double(record.v[k]) << ',' << format_double(record.y[k]) << '\n';
  }
}

SignalRecord read_record_csv(std::istream& in, double sample_time) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("record CSV is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,v,y") {
    throw ConfigError("record CSV line 1: expected header \"k,v,y\"");
  }
  SignalRecord rec;
  rec.sample_time = sample_time;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string fk, fv, fy;
    if (!std::getline(ss, fk, ',') || !std::getline(ss, fv, ',') || !std::getline(ss, fy)) {
      throw ConfigError("record CSV line " + std::to_string(lineno) + ": expected 3 fields");
    }
    try {
      if (std::stoull(fk) != rec.y.size()) {
        throw ConfigError("record CSV line " + std::to_string(lineno) + ": k out of sequence");
      }
      rec.v.push_back(std::stod(fv));
      rec.y.push_back(std::stod(fy));
    } catch (const std::logic_error&) {
      throw ConfigError("record CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  try {
    rec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("record CSV: ") + e.what());
  }
  return rec;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << 't';
  for (std::size_t i = 1; i <= trajectory.dimension; ++i) {
    out << ",x" << i;
  }
  out << ",y\n";
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    out << format_double(trajectory.t[k]);
    for (double x : trajectory.state(k)) {
      out << ',' << format_double(x);
    }
    out << ',' << format_double(trajectory.y[k]) << '\n';
  }
}

void write_psd_csv(std::ostream& out, const PsdEstimate& estimate) {
  out << "freq,power\n";
  for (std::size_t b = 0; b < estimate.power.size(); ++b) {
    out << format_double(estimate.frequency[b]) << ',' << format_double(estimate.power[b])
        << '\n';
  }
}

void write_phase_csv(std::ostream& out, const std::vector<std::pair<double, double>>& portrait) {
  out << "y,ydot\n";
  for (const auto& [y, yd] : portrait) {
    out << format_double(y) << ',' << format_double(yd) << '\n';
  }
}

void write_frequency_response_csv(std::ostream& out, const FrequencyResponse& response) {
  out << "omega,mag_db,phase_rad\n";
  for (std::size_t i = 0; i < response.omega.size(); ++i) {
    out << format_double(response.omega[i]) << ',' << format_double(response.magnitude_db[i])
        << ',' << format_double(response.phase[i]) << '\n';
  }
}

void write_series_csv(std::ostream& out, std::span<const double> y) {
  out << "k,y\n";
  for (std::size_t k = 0; k < y.size(); ++k) {
    out << k << ',' << format_double(y[k]) << '\n';
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ConfigError("cannot write " + path.string());
  }
  out << text;
}

}  // namespace sesid::io
