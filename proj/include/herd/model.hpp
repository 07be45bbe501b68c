#ifndef HERD_MODEL_HPP
#define HERD_MODEL_HPP

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "herd/errors.hpp"

namespace herd {

/// Model parameters shared by every other component.
///
/// Populations are indexed by their degree of connectivity. Population d
/// carries a mass fraction `masses[p]` of the total population and an
/// ordered menu of inactivity levels `strategies[p]` (strictly increasing,
/// all in [0,1]). `lambda`/`gamma` are the contagion/recovery rates,
/// `reward` is the (nonpositive) relative reward of staying inactive and
/// `tau` the information-broadcast rate.
struct ModelConfig {
  std::vector<int> degrees;
  std::vector<double> masses;
  std::vector<std::vector<double>> strategies;
  double lambda = 0.0;
  double gamma = 0.0;
  double reward = 0.0;
  double tau = 1.0;

  int population_count() const { return static_cast<int>(degrees.size()); }
  int class_count() const;  // n = sum of strategy-set sizes
};

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
  std::string joined() const;
};

/// Checks every ModelConfig invariant; the report names each violation.
ValidationReport validate(const ModelConfig& config);

/// Throwing variant of validate(), used by entry points.
void validate_or_throw(const ModelConfig& config);

/// Parses a config from JSON keys `degrees`, `masses`, `strategies`,
/// `lambda`, `gamma`, `reward`, `tau`. Errors carry the offending key path.
ModelConfig parse_config(const nlohmann::json& j);
ModelConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ModelConfig& config);

/// Bijection between (degree, strategy index) pairs and the flat class
/// index used by all vectors/matrices. Blocks are degree-major in the
/// order the degrees are listed; the strategy index is 1-based.
class ClassIndex {
 public:
  explicit ClassIndex(const ModelConfig& config);

  int size() const { return total_; }
  int population_count() const { return static_cast<int>(degrees_.size()); }

  int flatten(int degree, int strategy_index) const;
  std::pair<int, int> unflatten(int flat) const;  // -> (degree, strategy index)

  int offset(int pop) const { return offsets_[pop]; }
  int block_size(int pop) const { return sizes_[pop]; }
  int population_of(int flat) const;
  int degree_of_population(int pop) const { return degrees_[pop]; }

 private:
  std::vector<int> degrees_;
  std::vector<int> offsets_;
  std::vector<int> sizes_;
  int total_ = 0;
};

/// d-bar, the mean degree of the network.
double average_degree(const ModelConfig& config);

/// One point of the product of scaled simplices: block p sums to masses[p].
struct SocialState {
  Eigen::VectorXd x;
};

bool social_state_valid(const SocialState& state, const ModelConfig& config,
                        double tol = 1e-10);

/// Uniform-within-population social state (each block spreads its mass
/// evenly over the available strategies).
SocialState uniform_state(const ModelConfig& config);

/// (x_min, x_max): all mass on the first / last strategy of each block.
std::pair<SocialState, SocialState> extreme_states(const ModelConfig& config);

/// Blockwise first-order stochastic dominance: `hi` puts at least as much
/// mass on high strategies as `lo` in every population.
bool stochastically_dominates(const SocialState& hi, const SocialState& lo,
                              const ModelConfig& config, double tol = 1e-12);

// Per-class vectors over the flat index.
Eigen::VectorXd class_degrees(const ModelConfig& config);     // d
Eigen::VectorXd class_strategies(const ModelConfig& config);  // s
/// Per-class contagion pressure lambda * d * (1 - s); multiplying it by the
/// link-infection probability gives the force of infection on the class.
Eigen::VectorXd contagion_rates(const ModelConfig& config);

/// "d:i" label of a flat class index, e.g. "3:1".
std::string class_label(const ModelConfig& config, int flat);

}  // namespace herd

#endif
