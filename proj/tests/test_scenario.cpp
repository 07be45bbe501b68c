#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "herd/scenario.hpp"
#include "support.hpp"

using namespace herd;
namespace fs = std::filesystem;

namespace {

nlohmann::json reference_model_json() {
  return nlohmann::json{{"degrees", {3, 2}},
                        {"masses", {0.8498, 0.1502}},
                        {"strategies", {{0.1, 0.3, 0.5}, {0.3, 0.6}}},
                        {"lambda", 4.0},
                        {"gamma", 0.9},
                        {"reward", -0.1},
                        {"tau", 1.0}};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("herdsim_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

fs::path write_scenario(const TempDir& dir, const nlohmann::json& j,
                        const std::string& name = "scenario.json") {
  const fs::path file = dir.path / name;
  std::ofstream out(file);
  out << j.dump(2);
  return file;
}

struct RunOutcome {
  int code = 0;
  std::string out;
  std::string err;
};

RunOutcome run(const fs::path& scenario, const fs::path& out_dir) {
  std::ostringstream out, err;
  RunOutcome outcome;
  outcome.code = run_scenario(scenario.string(), out_dir.string(), {}, out, err);
  outcome.out = out.str();
  outcome.err = err.str();
  return outcome;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("ne-brd scenario writes a report and a monotone trace") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"schema_version", 1},
            {"model", reference_model_json()},
            {"command", "ne-brd"},
            {"params", {{"x0", "xmin"}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  CHECK(outcome.out.find("NE found") != std::string::npos);

  const auto report = nlohmann::json::parse(slurp(dir.path / "out" / "ne_report.json"));
  CHECK(report.at("is_nash") == true);
  CHECK(report.at("gap").get<double>() <= 1e-10);
  CHECK(report.at("support").get<std::string>().find("3:3") != std::string::npos);
  CHECK(report.at("support").get<std::string>().find("2:2") != std::string::npos);

  const std::string trace = slurp(dir.path / "out" / "brd_trace.csv");
  CHECK(trace.rfind("t,x_3_1", 0) == 0);
}

TEST_CASE("steady scenario on an all-isolated herd reports a dead epidemic") {
  TempDir dir;
  nlohmann::json model = reference_model_json();
  model["strategies"] = {{0.1, 1.0}, {0.3, 1.0}};
  const auto file = write_scenario(dir, {{"model", model},
                                         {"command", "steady"},
                                         {"params", {{"x", "xmax"}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir.path / "out" / "steady.json"));
  CHECK(report.at("theta_bar").get<double>() == 0.0);
  CHECK(report.at("kind") == "disease-free");
}

TEST_CASE("two-peak scenario artifacts carry the peak report") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "two-peak"},
            {"params",
             {{"switch_time", 50.0}, {"bias", 0.75}, {"horizon", 100.0}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  const auto report =
      nlohmann::json::parse(slurp(dir.path / "out" / "two_peak_report.json"));
  CHECK(report.at("peak_count").get<int>() >= 2);
  const std::string csv = slurp(dir.path / "out" / "two_peak_infection.csv");
  CHECK(csv.rfind("t,new_infection", 0) == 0);
}

TEST_CASE("schema violations exit with the config code and an error JSON") {
  TempDir dir;

  nlohmann::json bad_model = reference_model_json();
  bad_model["masses"] = {0.5, 0.6};
  const auto bad_mass = run(
      write_scenario(dir, {{"model", bad_model}, {"command", "steady"}}, "a.json"),
      dir.path / "out");
  CHECK(bad_mass.code == 1);
  const auto err = nlohmann::json::parse(bad_mass.err);
  CHECK(err.at("error").at("kind") == "config");
  CHECK(err.at("error").at("message").get<std::string>().find("mass sum") !=
        std::string::npos);

  const auto unknown = run(
      write_scenario(dir, {{"model", reference_model_json()}, {"command", "warp"}},
                     "b.json"),
      dir.path / "out");
  CHECK(unknown.code == 1);

  std::ofstream(dir.path / "c.json") << "{ not json";
  CHECK(run(dir.path / "c.json", dir.path / "out").code == 1);

  CHECK(run(dir.path / "missing.json", dir.path / "out").code == 3);
}

TEST_CASE("stochastic schedules demand a seed") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "simulate"},
            {"params",
             {{"x0", "uniform"},
              {"horizon", 2.0},
              {"schedule", {{"mode", "exponential"}, {"rate", 2.0}}}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 1);
  CHECK(outcome.err.find("seed") != std::string::npos);
}

TEST_CASE("solver non-convergence exits with the solver code") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "ne-brd"},
            {"params", {{"x0", "xmin"}, {"max_iter", 0}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 2);
  const auto err = nlohmann::json::parse(outcome.err);
  CHECK(err.at("error").at("kind") == "solver");
}

TEST_CASE("replaying a seeded scenario reproduces the files byte for byte") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "simulate"},
            {"seed", 20240811},
            {"params",
             {{"x0", "uniform"},
              {"i0", 0.01},
              {"horizon", 8.0},
              {"schedule", {{"mode", "exponential"}, {"rate", 1.5}, {"delay", 0.2}}}}}});
  const auto first = run(file, dir.path / "out1");
  const auto second = run(file, dir.path / "out2");
  REQUIRE(first.code == 0);
  REQUIRE(second.code == 0);
  CHECK(slurp(dir.path / "out1" / "simulate_trace.csv") ==
        slurp(dir.path / "out2" / "simulate_trace.csv"));
  CHECK(slurp(dir.path / "out1" / "simulate_report.json") ==
        slurp(dir.path / "out2" / "simulate_report.json"));
}

TEST_CASE("gamma sweep flips the regime column across the threshold") {
  TempDir dir;
  nlohmann::json model = reference_model_json();
  const auto file = write_scenario(
      dir, {{"model", model},
            {"command", "sweep"},
            {"params", {{"parameter", "gamma"}, {"values", {0.9, 20.0}}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  std::istringstream csv(slurp(dir.path / "out" / "sweep_summary.csv"));
  std::string header, low, high;
  std::getline(csv, header);
  std::getline(csv, low);
  std::getline(csv, high);
  CHECK(header == "param,value,regime,theta_bar,ne_profile,gap,dominant,error");
  CHECK(low.find("endemic") != std::string::npos);
  CHECK(high.find("disease-free") != std::string::npos);
}

TEST_CASE("reward sweep flips the dominance column across the critical value") {
  TempDir dir;
  nlohmann::json model = reference_model_json();
  model["strategies"] = {{0.1, 0.3, 0.5}, {0.1, 0.3, 0.5}};  // common menus
  const auto file = write_scenario(
      dir, {{"model", model},
            {"command", "sweep"},
            {"params", {{"parameter", "reward"}, {"values", {-0.1, -0.999}}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  std::istringstream csv(slurp(dir.path / "out" / "sweep_summary.csv"));
  std::string header, weak, strong;
  std::getline(csv, header);
  std::getline(csv, weak);
  std::getline(csv, strong);
  CHECK(weak.find("none") != std::string::npos);
  CHECK(strong.find("s_min") != std::string::npos);
}

TEST_CASE("empty sweep grid produces an empty summary and exit 0") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "sweep"},
            {"params", {{"parameter", "lambda"}, {"values", nlohmann::json::array()}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  std::istringstream csv(slurp(dir.path / "out" / "sweep_summary.csv"));
  std::string header, extra;
  std::getline(csv, header);
  CHECK(header == "param,value,regime,theta_bar,ne_profile,gap,dominant,error");
  CHECK_FALSE(std::getline(csv, extra));
}

TEST_CASE("network and carleman commands emit their artifacts") {
  TempDir dir;
  const auto net_file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "network"},
            {"params", {{"x", {{0.0, 0.0, 0.8498}, {0.0, 0.1502}}}}}},
      "net.json");
  CHECK(run(net_file, dir.path / "out").code == 0);
  const std::string edges = slurp(dir.path / "out" / "equivalent_network.csv");
  CHECK(edges.rfind("src_class,dst_class,weight", 0) == 0);

  const auto carleman_file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "carleman"},
            {"params",
             {{"x", "uniform"}, {"i0", 0.01}, {"order", 2}, {"horizon", 0.5}}}},
      "carleman.json");
  CHECK(run(carleman_file, dir.path / "out").code == 0);
  const std::string traj = slurp(dir.path / "out" / "carleman_trajectory.csv");
  CHECK(traj.rfind("t,I_3_1", 0) == 0);
}

TEST_CASE("every shipped scenario file runs cleanly") {
  TempDir dir;
  const fs::path scenarios = fs::path(HERD_SOURCE_DIR) / "scenarios";
  int ran = 0;
  for (const auto& entry : fs::directory_iterator(scenarios)) {
    if (entry.path().filename() == "model_reference.json") continue;  // bare model
    INFO(entry.path().string());
    const auto outcome = run(entry.path(), dir.path / entry.path().stem());
    CHECK(outcome.code == 0);
    ++ran;
  }
  CHECK(ran >= 7);
}

TEST_CASE("the reference model config parses") {
  const ModelConfig config =
      load_config((fs::path(HERD_SOURCE_DIR) / "scenarios" / "model_reference.json")
                      .string());
  CHECK(config.degrees == std::vector<int>{3, 2});
}

TEST_CASE("ne-opt scenario converges on the reference setup") {
  TempDir dir;
  const auto file = write_scenario(
      dir, {{"model", reference_model_json()},
            {"command", "ne-opt"},
            {"params", {{"x0", "xmin"}}}});
  const auto outcome = run(file, dir.path / "out");
  CHECK(outcome.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir.path / "out" / "ne_report.json"));
  CHECK(report.at("converged") == true);
  CHECK(report.at("gap").get<double>() <= 1e-8);
  CHECK(report.at("support").get<std::string>().find("3:3") != std::string::npos);
}
