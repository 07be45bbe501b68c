#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "herd/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"herdsim - coupled epidemic/strategy scenario runner"};

  std::string scenario_path;
  app.add_option("scenario", scenario_path, "scenario JSON file")->required();
  std::optional<std::string> out_dir;
  app.add_option("--out", out_dir, "output directory (overrides HERDSIM_OUT and the scenario)");
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "RNG seed (overrides the scenario)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help/--version exit 0 through here; anything else is bad usage
    return app.exit(e) == 0 ? 0 : 1;
  }
  return herd::run_scenario(scenario_path, out_dir, seed, std::cout, std::cerr);
}
