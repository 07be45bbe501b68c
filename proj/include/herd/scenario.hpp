#ifndef HERD_SCENARIO_HPP
#define HERD_SCENARIO_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "herd/model.hpp"

namespace herd {

/// One experiment: a model, a command and its parameters, an output
/// directory and a seed. See README for the JSON schema.
struct Scenario {
  int schema_version = 1;
  ModelConfig model;
  std::string command;
  nlohmann::json params;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const nlohmann::json& j);

/// Executes a scenario file end to end: resolves the output directory
/// (override > HERDSIM_OUT > scenario field), runs the command, writes the
/// artifact files and prints a one-line summary. Returns the process exit
/// code: 0 success, 1 config error, 2 solver failure, 3 io failure; on
/// failure a machine-readable error JSON goes to `err`.
int run_scenario(const std::string& path, std::optional<std::string> out_override,
                 std::optional<std::uint64_t> seed_override, std::ostream& out,
                 std::ostream& err);

}  // namespace herd

#endif
