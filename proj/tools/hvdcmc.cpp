#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hvdcmc/run.hpp"

int main(int argc, char **argv) {
  CLI::App app{"HVDC emergency capacity from PMU-tracked Thevenin equivalents"};
  std::string config_path;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "key = value config file")->required();
  app.add_option("--mode", mode, "overrides the config mode")
      ->check(CLI::IsMember({"simulate", "estimate", "mc", "run", "allocate"}));
  app.add_option("--seed", seed, "RNG seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? hvdcmc::exit_ok : hvdcmc::exit_usage;
  }

  hvdcmc::RunConfig cfg;
  try {
    cfg = hvdcmc::load_config(config_path);
    if (mode) cfg.mode = hvdcmc::parse_mode(*mode);
    if (seed) cfg.scenario.seed = *seed;
    if (out) cfg.out_dir = *out;
  } catch (const hvdcmc::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return hvdcmc::exit_config;
  }
  return hvdcmc::run_with_status(cfg, std::cout, std::cerr);
}
