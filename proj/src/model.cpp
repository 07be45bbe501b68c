#include "herd/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace herd {

namespace {
constexpr double kMassSumTol = 1e-12;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

int ModelConfig::class_count() const {
  int n = 0;
  for (const auto& s : strategies) n += static_cast<int>(s.size());
  return n;
}

std::string ValidationReport::joined() const {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

ValidationReport validate(const ModelConfig& config) {
  ValidationReport report;
  auto err = [&](const std::string& msg) { report.errors.push_back(msg); };

  const std::size_t D = config.degrees.size();
  if (D == 0) err("degrees: empty");
  if (config.masses.size() != D)
    err("masses: size " + std::to_string(config.masses.size()) +
        " does not match degrees size " + std::to_string(D));
  if (config.strategies.size() != D)
    err("strategies: size " + std::to_string(config.strategies.size()) +
        " does not match degrees size " + std::to_string(D));

  for (std::size_t p = 0; p < D; ++p) {
    if (config.degrees[p] <= 0)
      err("degrees[" + std::to_string(p) + "]: must be a positive integer");
    for (std::size_t q = p + 1; q < D; ++q)
      if (config.degrees[p] == config.degrees[q])
        err("degrees: duplicate degree " + std::to_string(config.degrees[p]));
  }

  double mass_sum = 0.0;
  for (std::size_t p = 0; p < config.masses.size(); ++p) {
    if (config.masses[p] < 0.0)
      err("masses[" + std::to_string(p) + "]: negative");
    mass_sum += config.masses[p];
  }
  if (!config.masses.empty() && std::abs(mass_sum - 1.0) > kMassSumTol)
    err("mass sum " + fmt(mass_sum) + " != 1");

  for (std::size_t p = 0; p < config.strategies.size(); ++p) {
    const auto& s = config.strategies[p];
    if (s.empty()) {
      err("strategies[" + std::to_string(p) + "]: empty");
      continue;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 0.0 || s[i] > 1.0)
        err("strategies[" + std::to_string(p) + "][" + std::to_string(i) +
            "]: outside [0,1]");
      if (i + 1 < s.size() && s[i + 1] <= s[i])
        err("strategies[" + std::to_string(p) +
            "]: strategies not strictly increasing");
    }
  }

  if (!(config.lambda > 0.0)) err("lambda: must be > 0");
  if (!(config.gamma > 0.0)) err("gamma: must be > 0");
  if (!(config.reward <= 0.0)) err("reward: must be <= 0");
  if (!(config.tau > 0.0)) err("tau: must be > 0");

  return report;
}

void validate_or_throw(const ModelConfig& config) {
  const auto report = validate(config);
  if (!report.ok()) throw ConfigError("invalid model config: " + report.joined());
}

namespace {

template <typename T>
T require(const nlohmann::json& j, const std::string& key, const char* type_name) {
  if (!j.contains(key)) throw ConfigError("model." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("model." + key + ": expected " + std::string(type_name));
  }
}

}  // namespace

ModelConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model: expected a JSON object");
  ModelConfig config;
  config.degrees = require<std::vector<int>>(j, "degrees", "array of integers");
  config.masses = require<std::vector<double>>(j, "masses", "array of numbers");
  config.strategies = require<std::vector<std::vector<double>>>(
      j, "strategies", "array of arrays of numbers");
  config.lambda = require<double>(j, "lambda", "number");
  config.gamma = require<double>(j, "gamma", "number");
  config.reward = require<double>(j, "reward", "number");
  config.tau = require<double>(j, "tau", "number");
  const auto report = validate(config);
  if (!report.ok()) throw ConfigError("model: " + report.joined());
  return config;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json config_to_json(const ModelConfig& config) {
  return nlohmann::json{{"degrees", config.degrees},
                        {"masses", config.masses},
                        {"strategies", config.strategies},
                        {"lambda", config.lambda},
                        {"gamma", config.gamma},
                        {"reward", config.reward},
                        {"tau", config.tau}};
}

ClassIndex::ClassIndex(const ModelConfig& config) : degrees_(config.degrees) {
  offsets_.reserve(degrees_.size());
  sizes_.reserve(degrees_.size());
  for (const auto& s : config.strategies) {
    offsets_.push_back(total_);
    sizes_.push_back(static_cast<int>(s.size()));
    total_ += static_cast<int>(s.size());
  }
}

int ClassIndex::flatten(int degree, int strategy_index) const {
  for (std::size_t p = 0; p < degrees_.size(); ++p) {
    if (degrees_[p] == degree) {
      if (strategy_index < 1 || strategy_index > sizes_[p])
        throw std::out_of_range("strategy index " + std::to_string(strategy_index) +
                                " out of range for degree " + std::to_string(degree));
      return offsets_[p] + strategy_index - 1;
    }
  }
  throw std::out_of_range("unknown degree " + std::to_string(degree));
}

std::pair<int, int> ClassIndex::unflatten(int flat) const {
  const int pop = population_of(flat);
  return {degrees_[pop], flat - offsets_[pop] + 1};
}

int ClassIndex::population_of(int flat) const {
  if (flat < 0 || flat >= total_)
    throw std::out_of_range("flat class index " + std::to_string(flat) +
                            " out of range");
  int pop = 0;
  while (pop + 1 < static_cast<int>(offsets_.size()) && offsets_[pop + 1] <= flat)
    ++pop;
  return pop;
}

double average_degree(const ModelConfig& config) {
  double dbar = 0.0;
  for (std::size_t p = 0; p < config.degrees.size(); ++p)
    dbar += config.degrees[p] * config.masses[p];
  return dbar;
}

bool social_state_valid(const SocialState& state, const ModelConfig& config,
                        double tol) {
  const ClassIndex idx(config);
  if (state.x.size() != idx.size()) return false;
  for (int k = 0; k < idx.size(); ++k)
    if (state.x[k] < -tol) return false;
  for (int p = 0; p < idx.population_count(); ++p) {
    const double sum = state.x.segment(idx.offset(p), idx.block_size(p)).sum();
    if (std::abs(sum - config.masses[p]) > tol) return false;
  }
  return true;
}

SocialState uniform_state(const ModelConfig& config) {
  const ClassIndex idx(config);
  Eigen::VectorXd x(idx.size());
  for (int p = 0; p < idx.population_count(); ++p) {
    const int n = idx.block_size(p);
    x.segment(idx.offset(p), n).setConstant(config.masses[p] / n);
  }
  return {x};
}

std::pair<SocialState, SocialState> extreme_states(const ModelConfig& config) {
  const ClassIndex idx(config);
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(idx.size());
  Eigen::VectorXd hi = Eigen::VectorXd::Zero(idx.size());
  for (int p = 0; p < idx.population_count(); ++p) {
    lo[idx.offset(p)] = config.masses[p];
    hi[idx.offset(p) + idx.block_size(p) - 1] = config.masses[p];
  }
  return {SocialState{lo}, SocialState{hi}};
}

bool stochastically_dominates(const SocialState& hi, const SocialState& lo,
                              const ModelConfig& config, double tol) {
  const ClassIndex idx(config);
  for (int p = 0; p < idx.population_count(); ++p) {
    double cum_hi = 0.0, cum_lo = 0.0;
    // Dominance = no more mass on any low-strategy prefix.
    for (int i = 0; i < idx.block_size(p) - 1; ++i) {
      cum_hi += hi.x[idx.offset(p) + i];
      cum_lo += lo.x[idx.offset(p) + i];
      if (cum_hi > cum_lo + tol) return false;
    }
  }
  return true;
}

Eigen::VectorXd class_degrees(const ModelConfig& config) {
  const ClassIndex idx(config);
  Eigen::VectorXd d(idx.size());
  for (int p = 0; p < idx.population_count(); ++p)
    d.segment(idx.offset(p), idx.block_size(p))
        .setConstant(static_cast<double>(config.degrees[p]));
  return d;
}

Eigen::VectorXd class_strategies(const ModelConfig& config) {
  const ClassIndex idx(config);
  Eigen::VectorXd s(idx.size());
  for (int p = 0; p < idx.population_count(); ++p)
    for (int i = 0; i < idx.block_size(p); ++i)
      s[idx.offset(p) + i] = config.strategies[p][i];
  return s;
}

Eigen::VectorXd contagion_rates(const ModelConfig& config) {
  const Eigen::VectorXd d = class_degrees(config);
  const Eigen::VectorXd s = class_strategies(config);
  return config.lambda * d.array() * (1.0 - s.array());
}

std::string class_label(const ModelConfig& config, int flat) {
  const auto [degree, i] = ClassIndex(config).unflatten(flat);
  return std::to_string(degree) + ":" + std::to_string(i);
}

}  // namespace herd
