#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "nvw/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"NV widefield imaging simulator and analysis pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nvw::kToolVersion);

  std::string config;
  std::string out;
  std::string map;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config file")->required()->check(
        CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory (default runs/<name>)");
  };
  add_common(app.add_subcommand("calibrate", "ODMR scan and per-pixel slope map"));
  add_common(app.add_subcommand("simulate", "synthesize lock-in camera acquisitions"));
  add_common(app.add_subcommand("analyze", "reconstruct fields, spectra and noise"));
  auto* render = app.add_subcommand("render", "render a map file to PGM");
  render->add_option("--map", map, "map file")->required()->check(CLI::ExistingFile);
  render->add_option("--config", config, "ignored; accepted for symmetry");
  render->add_option("--out", out, "output directory (default <map dir>/render)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nvw::kExitError;
  }
  const std::string stage = app.get_subcommands().front()->get_name();
  return nvw::run_stage(stage, config, seed, out, map, std::cout, std::cerr);
}
