// qmotor: batch front end for the two-atom ring-lattice motor simulator.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 numerical
// failure at one or more parameter points (remaining points still complete).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "qmotor/experiments.hpp"

namespace {

int run_config(qmotor::ExperimentConfig cfg, const std::string& out_override) {
  if (!out_override.empty()) cfg.output.dir = out_override;
  cfg.validate();
  const auto res = qmotor::run(cfg);
  for (const auto& f : res.outputs)
    std::cout << "wrote " << (std::filesystem::path(cfg.output.dir) / f).string() << '\n';
  if (res.exit_code != 0)
    std::cerr << "one or more parameter points failed; see manifest.json\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "qmotor - driven two-atom quantum motor on a ring lattice: exact propagation,\n"
      "Floquet transport analysis, start-time ensembles and load characteristics.\n"
      "Exit codes: 0 success, 1 validation error, 2 numerical failure at any point."};
  app.require_subcommand(1);

  std::string config_path;
  auto* cmd_run = app.add_subcommand("run", "run an experiment from a JSON config file");
  cmd_run->add_option("config", config_path, "path to the JSON config")->required();

  std::string preset_name, preset_out, preset_scale = "desk";
  auto* cmd_preset = app.add_subcommand("preset", "run a bundled parameter study");
  cmd_preset->add_option("name", preset_name, "preset name (see list-presets)")->required();
  cmd_preset->add_option("--out", preset_out, "output directory (default: out/<name>)");
  cmd_preset->add_option("--scale", preset_scale, "desk|full")
      ->check(CLI::IsMember({"desk", "full"}));
  bool preset_svg = false;
  cmd_preset->add_flag("--svg", preset_svg, "also write SVG quick-look plots");

  auto* cmd_list = app.add_subcommand("list-presets", "list the bundled parameter studies");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_list->parsed()) {
      for (const auto& p : qmotor::presets())
        std::cout << p.name << "  " << p.description << '\n';
      return 0;
    }
    if (cmd_run->parsed()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "cannot open config file: " << config_path << '\n';
        return 1;
      }
      qmotor::ExperimentConfig cfg;
      try {
        const auto j = qmotor::json::parse(in);
        cfg = j.get<qmotor::ExperimentConfig>();
      } catch (const qmotor::json::exception& e) {
        std::cerr << "config parse error in " << config_path << ": " << e.what() << '\n';
        return 1;
      }
      return run_config(cfg, "");
    }
    // preset
    qmotor::ExperimentConfig cfg = qmotor::preset(preset_name, preset_scale);
    cfg.output.dir = preset_out.empty() ? "out/" + preset_name : preset_out;
    cfg.output.svg = preset_svg;
    return run_config(cfg, "");
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const qmotor::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
}
