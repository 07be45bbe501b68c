#include "herd/scenario.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "herd/epidemic.hpp"
#include "herd/game.hpp"
#include "herd/learning.hpp"
#include "herd/linearize.hpp"

namespace herd {

namespace fs = std::filesystem;

namespace {

SocialState parse_social_state(const nlohmann::json& j, const ModelConfig& config,
                               const std::string& key) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "xmin") return extreme_states(config).first;
    if (name == "xmax") return extreme_states(config).second;
    if (name == "uniform") return uniform_state(config);
    throw ConfigError("params." + key + ": unknown named state '" + name + "'");
  }
  if (!j.is_array())
    throw ConfigError("params." + key + ": expected \"xmin\"/\"xmax\"/\"uniform\" or "
                      "an array of per-population arrays");
  const ClassIndex idx(config);
  if (static_cast<int>(j.size()) != idx.population_count())
    throw ConfigError("params." + key + ": expected one array per population");
  SocialState state{Eigen::VectorXd(idx.size())};
  for (int p = 0; p < idx.population_count(); ++p) {
    if (!j[p].is_array() || static_cast<int>(j[p].size()) != idx.block_size(p))
      throw ConfigError("params." + key + "[" + std::to_string(p) +
                        "]: expected " + std::to_string(idx.block_size(p)) +
                        " entries");
    for (int i = 0; i < idx.block_size(p); ++i)
      state.x[idx.offset(p) + i] = j[p][i].get<double>();
  }
  if (!social_state_valid(state, config))
    throw ConfigError("params." + key + ": block sums must match the population masses");
  return state;
}

Eigen::VectorXd parse_infection(const nlohmann::json& j, const ModelConfig& config,
                                const std::string& key) {
  const ClassIndex idx(config);
  if (j.is_number()) {
    const double v = j.get<double>();
    if (v < 0.0 || v > 1.0) throw ConfigError("params." + key + ": outside [0,1]");
    return Eigen::VectorXd::Constant(idx.size(), v);
  }
  if (!j.is_array() || static_cast<int>(j.size()) != idx.population_count())
    throw ConfigError("params." + key + ": expected a number or per-population arrays");
  Eigen::VectorXd v(idx.size());
  for (int p = 0; p < idx.population_count(); ++p) {
    if (!j[p].is_array() || static_cast<int>(j[p].size()) != idx.block_size(p))
      throw ConfigError("params." + key + "[" + std::to_string(p) + "]: wrong length");
    for (int i = 0; i < idx.block_size(p); ++i)
      v[idx.offset(p) + i] = j[p][i].get<double>();
  }
  if (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0)
    throw ConfigError("params." + key + ": entries outside [0,1]");
  return v;
}

BroadcastSchedule parse_schedule(const nlohmann::json& j, std::uint64_t seed) {
  BroadcastSchedule sched;
  sched.seed = seed;
  if (j.is_null()) return sched;
  if (!j.is_object()) throw ConfigError("params.schedule: expected an object");
  const std::string mode = j.value("mode", "steady-state");
  if (mode == "steady-state")
    sched.mode = BroadcastSchedule::Mode::SteadyState;
  else if (mode == "exponential")
    sched.mode = BroadcastSchedule::Mode::Exponential;
  else if (mode == "fixed")
    sched.mode = BroadcastSchedule::Mode::Fixed;
  else
    throw ConfigError("params.schedule.mode: unknown mode '" + mode + "'");
  sched.rate = j.value("rate", 1.0);
  sched.interval = j.value("interval", 1.0);
  sched.delay = j.value("delay", 0.0);
  if (sched.delay < 0.0) throw ConfigError("params.schedule.delay: negative");
  return sched;
}

nlohmann::json per_population(const Eigen::VectorXd& v, const ModelConfig& config) {
  const ClassIndex idx(config);
  nlohmann::json out = nlohmann::json::array();
  for (int p = 0; p < idx.population_count(); ++p) {
    nlohmann::json block = nlohmann::json::array();
    for (int i = 0; i < idx.block_size(p); ++i) block.push_back(v[idx.offset(p) + i]);
    out.push_back(block);
  }
  return out;
}

std::string support_string(const SocialState& x, const ModelConfig& config,
                           double floor = 1e-9) {
  std::string out;
  for (int k = 0; k < x.x.size(); ++k) {
    if (x.x[k] <= floor) continue;
    if (!out.empty()) out += ";";
    std::ostringstream mass;
    mass.precision(17);
    mass << x.x[k];
    out += class_label(config, k) + "=" + mass.str();
  }
  return out.empty() ? "-" : out;
}

std::ofstream open_artifact(const fs::path& dir, const std::string& name) {
  std::ofstream file(dir / name);
  if (!file) throw IoError("cannot write " + (dir / name).string());
  return file;
}

void write_json(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  auto file = open_artifact(dir, name);
  file << j.dump(2) << "\n";
}

nlohmann::json ne_report_json(const SocialState& x, const Eigen::VectorXd& y,
                              double gap, const NashReport& nash, bool converged,
                              int iterations, const ModelConfig& config) {
  nlohmann::json j;
  j["x_star"] = per_population(x.x, config);
  j["y_star"] = std::vector<double>(y.data(), y.data() + y.size());
  j["gap"] = gap;
  j["regrets"] =
      std::vector<double>(nash.regrets.data(), nash.regrets.data() + nash.regrets.size());
  j["is_nash"] = nash.is_nash;
  j["converged"] = converged;
  j["iterations"] = iterations;
  j["support"] = support_string(x, config);
  return j;
}

struct CommandResult {
  CommandResult() = default;
  explicit CommandResult(std::string text) : summary(std::move(text)) {}

  std::string summary;
  bool solver_failure = false;
  std::string failure_message;
};

CommandResult cmd_steady(const Scenario& sc, const fs::path& dir) {
  const SocialState x =
      parse_social_state(sc.params.value("x", nlohmann::json("uniform")), sc.model, "x");
  const SteadyState steady = steady_state(x, sc.model);
  const Eigen::VectorXd payoffs = payoff_from_eta(steady.infected_bar, sc.model);
  const NashReport nash = nash_report_for(x, payoffs, sc.model, 1e-9);

  nlohmann::json j;
  j["theta_bar"] = steady.theta_bar;
  j["kind"] = steady.kind == SteadyKind::Endemic ? "endemic" : "disease-free";
  j["regime"] = to_string(stability_regime(sc.model));
  j["infected_bar"] = per_population(steady.infected_bar, sc.model);
  j["payoffs"] = per_population(payoffs, sc.model);
  j["gap"] = gap_value(x, payoffs, sc.model);
  j["regrets"] = std::vector<double>(nash.regrets.data(),
                                     nash.regrets.data() + nash.regrets.size());
  j["is_nash"] = nash.is_nash;
  if (steady.kind == SteadyKind::Endemic) {
    const Eigen::MatrixXd df = payoff_gradient(x, sc.model);
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < df.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < df.cols(); ++c) row.push_back(df(r, c));
      rows.push_back(row);
    }
    j["payoff_jacobian"] = rows;
    j["submodular"] = submodularity_certificate(df, sc.model).pass;
  }
  write_json(dir, "steady.json", j);

  std::ostringstream summary;
  summary.precision(12);
  summary << "theta_bar=" << steady.theta_bar << " regime="
          << to_string(stability_regime(sc.model)) << " is_nash="
          << (nash.is_nash ? "yes" : "no");
  return CommandResult(summary.str());
}

CommandResult cmd_ne_brd(const Scenario& sc, const fs::path& dir) {
  const SocialState x0 =
      parse_social_state(sc.params.value("x0", nlohmann::json("xmin")), sc.model, "x0");
  const int max_iter = sc.params.value("max_iter", 200);
  const double tol = sc.params.value("tol", 1e-10);
  const double delta = sc.params.value("delta", 1.0);
  const std::string update = sc.params.value("update", "simultaneous");
  if (update != "simultaneous" && update != "sequential")
    throw ConfigError("params.update: expected simultaneous or sequential");
  const UpdateOrder order = update == "sequential" ? UpdateOrder::Sequential
                                                   : UpdateOrder::Simultaneous;

  const LearningTrace trace =
      brd_continuous(x0, sc.model, delta, max_iter, tol, order);
  {
    auto csv = open_artifact(dir, "brd_trace.csv");
    write_learning_csv(csv, trace, sc.model);
  }
  const Eigen::VectorXd payoffs = payoff_steady(trace.final_x, sc.model);
  const NashReport nash = nash_report_for(trace.final_x, payoffs, sc.model, 1e-8);
  const ClassIndex idx(sc.model);
  Eigen::VectorXd y(idx.population_count());
  for (int p = 0; p < idx.population_count(); ++p)
    y[p] = payoffs.segment(idx.offset(p), idx.block_size(p)).maxCoeff();
  const double gap = gap_value(trace.final_x, payoffs, sc.model);
  write_json(dir, "ne_report.json",
             ne_report_json(trace.final_x, y, gap, nash, trace.converged,
                            trace.iterations, sc.model));

  std::ostringstream summary;
  summary.precision(12);
  summary << (trace.converged ? "NE found" : "no convergence") << " in "
          << trace.iterations << " iterations, gap=" << gap
          << ", support=" << support_string(trace.final_x, sc.model);
  CommandResult result(summary.str());
  if (!trace.converged) {
    result.solver_failure = true;
    result.failure_message = "best-response dynamics: " + trace.status;
  }
  return result;
}

CommandResult cmd_ne_opt(const Scenario& sc, const fs::path& dir) {
  const SocialState x0 =
      parse_social_state(sc.params.value("x0", nlohmann::json("uniform")), sc.model, "x0");
  const double tol = sc.params.value("tol", 1e-8);
  const int max_iter = sc.params.value("max_iter", 2000);

  const NeOptResult result = ne_optimize(x0, sc.model, tol, max_iter);
  {
    auto csv = open_artifact(dir, "opt_trace.csv");
    write_learning_csv(csv, result.trace, sc.model);
  }
  const Eigen::VectorXd payoffs = payoff_steady(result.x, sc.model);
  const NashReport nash = nash_report_for(result.x, payoffs, sc.model, 1e-6);
  write_json(dir, "ne_report.json",
             ne_report_json(result.x, result.y, result.gap, nash, result.converged,
                            result.trace.iterations, sc.model));

  std::ostringstream summary;
  summary.precision(12);
  summary << (result.converged ? "NE found" : "stalled") << " after "
          << result.trace.iterations << " iterations, gap=" << result.gap
          << ", support=" << support_string(result.x, sc.model);
  CommandResult out(summary.str());
  if (!result.converged) {
    out.solver_failure = true;
    out.failure_message = "gap optimizer: " + result.status;
  }
  return out;
}

CommandResult cmd_simulate(const Scenario& sc, const fs::path& dir,
                           std::uint64_t seed) {
  const SocialState x0 =
      parse_social_state(sc.params.value("x0", nlohmann::json("uniform")), sc.model, "x0");
  const Eigen::VectorXd i0 =
      parse_infection(sc.params.value("i0", nlohmann::json(0.01)), sc.model, "i0");
  const BroadcastSchedule sched =
      parse_schedule(sc.params.value("schedule", nlohmann::json()), seed);
  const double horizon = sc.params.value("horizon", 20.0);
  const double out_step = sc.params.value("out_step", 0.0);
  const double ode_step = sc.params.value("step", 0.0);

  const CoupledTrace trace =
      coupled_simulate(x0, i0, sc.model, sched, horizon, out_step, ode_step);
  {
    auto csv = open_artifact(dir, "simulate_trace.csv");
    write_coupled_csv(csv, trace, sc.model);
  }
  const NashReport nash = is_nash(trace.final_x, sc.model, 1e-6);
  nlohmann::json j;
  j["final_x"] = per_population(trace.final_x.x, sc.model);
  j["final_infected"] = per_population(trace.final_infected, sc.model);
  j["events"] = trace.event_count;
  j["is_nash"] = nash.is_nash;
  j["gap"] = gap_value(trace.final_x, sc.model);
  j["max_clamp"] = trace.max_clamp;
  write_json(dir, "simulate_report.json", j);

  std::ostringstream summary;
  summary << "simulated " << trace.event_count << " broadcasts, final support="
          << support_string(trace.final_x, sc.model)
          << ", is_nash=" << (nash.is_nash ? "yes" : "no");
  return CommandResult(summary.str());
}

CommandResult cmd_two_peak(const Scenario& sc, const fs::path& dir,
                           std::uint64_t seed) {
  TwoPeakOptions options;
  if (sc.params.contains("x0"))
    options.x0 = parse_social_state(sc.params.at("x0"), sc.model, "x0");
  options.i0 = sc.params.value("i0", 0.01);
  options.schedule = parse_schedule(
      sc.params.value("schedule",
                      nlohmann::json{{"mode", "fixed"}, {"interval", 1.0}}),
      seed);
  options.out_step = sc.params.value("out_step", 0.0);
  options.ode_step = sc.params.value("step", 0.0);
  options.min_separation = sc.params.value("min_separation", 0.0);
  const double switch_time = sc.params.value("switch_time", 50.0);
  const double bias = sc.params.value("bias", 0.75);
  const double horizon = sc.params.value("horizon", 100.0);

  const TwoPeakResult result =
      two_peak_scenario(sc.model, switch_time, bias, horizon, options);
  {
    auto csv = open_artifact(dir, "two_peak_infection.csv");
    csv << "t,new_infection\n";
    char buf[32];
    for (std::size_t r = 0; r < result.grid_times.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", result.grid_times[r]);
      csv << buf << ",";
      std::snprintf(buf, sizeof buf, "%.17g", result.new_infection[r]);
      csv << buf << "\n";
    }
  }
  {
    auto csv = open_artifact(dir, "two_peak_trace.csv");
    write_coupled_csv(csv, result.trace, sc.model);
  }
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& p : result.peaks) peaks.push_back({{"t", p.t}, {"value", p.value}});
  write_json(dir, "two_peak_report.json",
             nlohmann::json{{"peak_count", result.peaks.size()},
                            {"peaks", peaks},
                            {"switch_time", switch_time},
                            {"bias", bias}});

  std::ostringstream summary;
  summary << "peaks=" << result.peaks.size();
  if (!result.peaks.empty()) {
    summary << " at t=";
    for (std::size_t i = 0; i < result.peaks.size(); ++i)
      summary << (i ? "," : "") << result.peaks[i].t;
  }
  return CommandResult(summary.str());
}

CommandResult cmd_carleman(const Scenario& sc, const fs::path& dir) {
  const SocialState x =
      parse_social_state(sc.params.value("x", nlohmann::json("uniform")), sc.model, "x");
  const Eigen::VectorXd i0 =
      parse_infection(sc.params.value("i0", nlohmann::json(0.01)), sc.model, "i0");
  const int order = sc.params.value("order", 3);
  const double horizon = sc.params.value("horizon", 2.0);
  const double step = sc.params.value("step", 1e-3);
  const double reset_period = sc.params.value("reset_period", 0.1);

  const CarlemanSystem sys = carleman_build(x, sc.model, order);
  const int stride = std::max(1, static_cast<int>(horizon / step / 1000));
  const Trajectory traj = carleman_integrate(i0, sys, horizon, step, reset_period, stride);
  {
    auto csv = open_artifact(dir, "carleman_trajectory.csv");
    write_trajectory_csv(csv, traj, sc.model);
  }

  std::ostringstream summary;
  summary.precision(12);
  summary << "carleman order=" << order << " dim=" << sys.total_dim
          << " final_theta=" << traj.thetas.back();
  return CommandResult(summary.str());
}

CommandResult cmd_network(const Scenario& sc, const fs::path& dir) {
  const SocialState x =
      parse_social_state(sc.params.value("x", nlohmann::json("uniform")), sc.model, "x");
  const double threshold = sc.params.value("threshold", 1e-9);
  const auto edges = export_equivalent_network(x, sc.model, threshold);
  {
    auto csv = open_artifact(dir, "equivalent_network.csv");
    write_edges_csv(csv, edges, sc.model);
  }
  std::ostringstream summary;
  summary << "network with " << ClassIndex(sc.model).size() << " nodes, "
          << edges.size() << " edges";
  return CommandResult(summary.str());
}

CommandResult cmd_sweep(const Scenario& sc, const fs::path& dir) {
  const std::string parameter = sc.params.value("parameter", "");
  if (parameter != "lambda" && parameter != "gamma" && parameter != "reward" &&
      parameter != "tau")
    throw ConfigError("params.parameter: must be one of lambda/gamma/reward/tau");
  if (!sc.params.contains("values") || !sc.params.at("values").is_array())
    throw ConfigError("params.values: expected an array of numbers");
  const auto values = sc.params.at("values").get<std::vector<double>>();

  auto csv = open_artifact(dir, "sweep_summary.csv");
  csv << "param,value,regime,theta_bar,ne_profile,gap,dominant,error\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    csv << buf;
  };
  int failures = 0;
  for (const double value : values) {
    ModelConfig point = sc.model;
    if (parameter == "lambda") point.lambda = value;
    else if (parameter == "gamma") point.gamma = value;
    else if (parameter == "reward") point.reward = value;
    else point.tau = value;

    csv << parameter << ",";
    put(value);
    const auto report = validate(point);
    if (!report.ok()) {
      csv << ",,,,,," << report.joined() << "\n";
      ++failures;
      continue;
    }
    try {
      const LearningTrace trace = brd_run(extreme_states(point).first, point);
      const double theta = steady_theta_fixed_point(trace.final_x, point);
      const double gap = gap_value(trace.final_x, point);
      std::string dominant = "n/a";
      try {
        const auto dom = dominance_check(point);
        dominant = dom ? "s_min" : "none";
      } catch (const std::invalid_argument&) {
        // strategy sets differ across populations; dominance undefined
      }
      csv << "," << to_string(stability_regime(point)) << ",";
      put(theta);
      csv << "," << support_string(trace.final_x, point) << ",";
      put(gap);
      csv << "," << dominant << ",";
      if (!trace.converged) {
        csv << "best-response dynamics did not converge";
        ++failures;
      }
      csv << "\n";
    } catch (const Error& e) {
      csv << ",,,,,," << e.what() << "\n";
      ++failures;
    }
  }
  std::ostringstream summary;
  summary << "sweep over " << parameter << ": " << values.size() << " points, "
          << failures << " failures";
  return CommandResult(summary.str());
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  Scenario sc;
  sc.schema_version = j.value("schema_version", 1);
  if (sc.schema_version != 1)
    throw ConfigError("schema_version: unsupported version " +
                      std::to_string(sc.schema_version));
  if (!j.contains("model")) throw ConfigError("model: missing");
  sc.model = parse_config(j.at("model"));
  if (!j.contains("command") || !j.at("command").is_string())
    throw ConfigError("command: missing or not a string");
  sc.command = j.at("command").get<std::string>();
  sc.params = j.value("params", nlohmann::json::object());
  sc.output_dir = j.value("output_dir", std::string("."));
  if (j.contains("seed")) sc.seed = j.at("seed").get<std::uint64_t>();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario file " + path + ": " + e.what());
  }
  return parse_scenario(j);
}

int run_scenario(const std::string& path, std::optional<std::string> out_override,
                 std::optional<std::uint64_t> seed_override, std::ostream& out,
                 std::ostream& err) {
  auto fail = [&err](int code, const std::string& kind, const std::string& message) {
    err << nlohmann::json{{"error", {{"code", code}, {"kind", kind},
                                     {"message", message}}}}
               .dump()
        << "\n";
    return code;
  };

  try {
    Scenario sc = load_scenario(path);
    if (seed_override) sc.seed = *seed_override;

    std::string out_dir = sc.output_dir;
    if (const char* env = std::getenv("HERDSIM_OUT")) out_dir = env;
    if (out_override) out_dir = *out_override;

    const bool stochastic =
        sc.params.contains("schedule") &&
        sc.params.at("schedule").value("mode", "steady-state") == "exponential";
    if (stochastic && !sc.seed)
      throw ConfigError("seed: required for stochastic (exponential) schedules");
    const std::uint64_t seed = sc.seed.value_or(0);

    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string());

    CommandResult result;
    if (sc.command == "steady") result = cmd_steady(sc, dir);
    else if (sc.command == "ne-brd") result = cmd_ne_brd(sc, dir);
    else if (sc.command == "ne-opt") result = cmd_ne_opt(sc, dir);
    else if (sc.command == "simulate") result = cmd_simulate(sc, dir, seed);
    else if (sc.command == "two-peak") result = cmd_two_peak(sc, dir, seed);
    else if (sc.command == "carleman") result = cmd_carleman(sc, dir);
    else if (sc.command == "network") result = cmd_network(sc, dir);
    else if (sc.command == "sweep") result = cmd_sweep(sc, dir);
    else
      throw ConfigError("command: unknown command '" + sc.command + "'");

    out << result.summary << "\n";
    if (result.solver_failure) return fail(2, "solver", result.failure_message);
    return 0;
  } catch (const ConfigError& e) {
    return fail(1, "config", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(1, "config", e.what());
  } catch (const SolverError& e) {
    return fail(2, "solver", e.what());
  } catch (const IoError& e) {
    return fail(3, "io", e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(1, "config", e.what());
  }
}

}  // namespace herd
