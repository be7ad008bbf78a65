#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "sesid/error.hpp"
#include "sesid/experiment.hpp"
#include "sesid/io.hpp"

namespace {

namespace ex = sesid::experiment;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config_path;
  std::string preset_name;
  std::string out_root = "runs";
  std::string out_dir;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  bool noisy = false;
  bool noiseless = false;
  std::optional<std::size_t> n_hat;
  std::optional<std::size_t> d_hat;
  std::string record;
  std::string model;
};

void add_common(CLI::App* cmd, Options& o) {
  auto* source = cmd->add_option_group("source");
  source->add_option("--config", o.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  source->add_option("--preset", o.preset_name, "Built-in experiment preset");
  source->require_option(1);
  cmd->add_option("--out", o.out_root, "Root directory for timestamped run directories");
  cmd->add_option("--out-dir", o.out_dir, "Write directly into this directory");
  cmd->add_option("--samples", o.samples, "Number of identification samples");
  cmd->add_option("--seed", o.seed, "Master seed (input, initial history and noise)");
  auto* noisy = cmd->add_flag("--noisy", o.noisy, "Add the configured sensor noise");
  cmd->add_flag("--noiseless", o.noiseless, "Identify from the clean record")->excludes(noisy);
  cmd->add_option("--n-hat", o.n_hat, "Identified model order");
  cmd->add_option("--d-hat", o.d_hat, "Identified delay");
}

int run(ex::Command command, const Options& o) {
  ex::RunRequest request;
  request.command = command;
  if (!o.preset_name.empty()) {
    request.preset = o.preset_name;
    request.config = ex::preset(o.preset_name);
  } else {
    request.config = sesid::io::read_json_file(o.config_path);
  }
  ex::Overrides overrides;
  overrides.samples = o.samples;
  overrides.seed = o.seed;
  overrides.n_hat = o.n_hat;
  overrides.d_hat = o.d_hat;
  if (o.noisy) overrides.noisy = true;
  if (o.noiseless) overrides.noisy = false;
  request.config = ex::apply_overrides(request.config, overrides);
  if (!o.record.empty()) request.record_csv = o.record;
  if (!o.model.empty()) request.model_json = o.model;

  const std::string name = request.config.value("name", std::string("experiment"));
  const std::filesystem::path dir =
      o.out_dir.empty() ? ex::timestamped_directory(o.out_root, name + "-" + ex::to_string(command))
                        : std::filesystem::path(o.out_dir);
  const auto manifest = ex::execute(request, dir);
  std::cout << dir.string() << '\n';
  if (manifest.contains("identification")) {
    const auto& id = manifest["identification"];
    std::cout << "J_LS " << id["J_LS"] << "  J " << id["J"] << "  bound "
              << (id["bound_holds"].get<bool>() ? "holds" : "VIOLATED") << '\n';
  }
  if (manifest.contains("validation")) {
    const auto& v = manifest["validation"];
    std::cout << "truth " << v["truth_frequency"] << " Hz  model " << v["model_frequency"]
              << " Hz  bins apart " << v["bin_difference"] << "  overlap " << v["range_overlap"]
              << '\n';
    if (v.contains("error")) std::cout << "validation: " << v["error"].get<std::string>() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-excited system identification with CPL Lur'e models"};
  app.set_version_flag("--version", std::string(SESID_VERSION));
  app.require_subcommand(1);

  Options o;
  struct Sub {
    ex::Command command;
    const char* help;
  };
  const Sub subs[] = {
      {ex::Command::run, "Simulate, identify and validate"},
      {ex::Command::simulate, "Simulate the truth system and write the record"},
      {ex::Command::identify, "Identify a model from a simulated or given record"},
      {ex::Command::validate, "Compare a model against the truth under the validation input"},
      {ex::Command::sweep, "Identify over an (n_hat, d_hat) grid"},
  };
  std::optional<ex::Command> chosen;
  for (const Sub& s : subs) {
    auto* cmd = app.add_subcommand(ex::to_string(s.command), s.help);
    add_common(cmd, o);
    if (s.command == ex::Command::identify) {
      cmd->add_option("--record", o.record, "Record CSV (k,v,y) to identify from")
          ->check(CLI::ExistingFile);
    }
    if (s.command == ex::Command::validate) {
      cmd->add_option("--model", o.model, "Model JSON to validate")->check(CLI::ExistingFile);
    }
    cmd->callback([&chosen, c = s.command] { chosen = c; });
  }

  std::string preset_name;
  bool list = false;
  auto* preset_cmd = app.add_subcommand("preset", "Print a built-in preset config");
  preset_cmd->add_option("name", preset_name, "Preset name");
  preset_cmd->add_flag("--list", list, "List preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (preset_cmd->parsed()) {
      if (list || preset_name.empty()) {
        for (const auto& n : ex::preset_names()) std::cout << n << '\n';
      } else {
        std::cout << ex::preset(preset_name).dump(2) << '\n';
      }
      return 0;
    }
    return run(*chosen, o);
  } catch (const sesid::NumericalError& e) {
    std::cerr << "sesid: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const sesid::ConfigError& e) {
    std::cerr << "sesid: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sesid::DomainError& e) {
    std::cerr << "sesid: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sesid::IndexError& e) {
    std::cerr << "sesid: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "sesid: " << e.what() << '\n';
    return 1;
  }
}
