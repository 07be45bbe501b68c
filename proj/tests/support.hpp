#ifndef HERD_TESTS_SUPPORT_HPP
#define HERD_TESTS_SUPPORT_HPP

#include <algorithm>
#include <set>
#include <vector>

#include "herd/epidemic.hpp"
#include "herd/game.hpp"
#include "herd/model.hpp"
#include "herd/rng.hpp"

namespace herd::testing {

// The two-population setup used throughout the experiments: degrees 3 and 2,
// strategy menus of sizes 3 and 2, strongly endemic, weak inactivity reward.
inline ModelConfig reference_config() {
  ModelConfig config;
  config.degrees = {3, 2};
  config.masses = {0.8498, 0.1502};
  config.strategies = {{0.1, 0.3, 0.5}, {0.3, 0.6}};
  config.lambda = 4.0;
  config.gamma = 0.9;
  config.reward = -0.1;
  config.tau = 1.0;
  return config;
}

inline ModelConfig single_class_config(double lambda = 2.0, double gamma = 1.0,
                                       int degree = 1, double s = 0.0) {
  ModelConfig config;
  config.degrees = {degree};
  config.masses = {1.0};
  config.strategies = {{s}};
  config.lambda = lambda;
  config.gamma = gamma;
  config.reward = -0.1;
  config.tau = 1.0;
  return config;
}

// Random population structure: D <= max_populations, block sizes <= max_block,
// distinct degrees, strategies with pairwise gaps >= 0.05 so difference-based
// certificates stay well conditioned.
inline ModelConfig random_structure(Rng& rng, int max_populations = 3,
                                    int max_block = 4, double s_cap = 0.8) {
  ModelConfig config;
  const int D = rng.uniform_int(1, max_populations);
  std::set<int> degree_set;
  while (static_cast<int>(degree_set.size()) < D)
    degree_set.insert(rng.uniform_int(1, 2 * max_populations));
  config.degrees.assign(degree_set.begin(), degree_set.end());
  std::shuffle(config.degrees.begin(), config.degrees.end(),
               std::mt19937_64(rng.raw()));

  config.masses.resize(D);
  double total = 0.0;
  for (auto& m : config.masses) total += (m = rng.uniform(0.2, 1.0));
  for (auto& m : config.masses) m /= total;
  // Pin the rounding residue on the last block so the mass sum is exact.
  double sum = 0.0;
  for (std::size_t p = 0; p + 1 < config.masses.size(); ++p) sum += config.masses[p];
  config.masses.back() = 1.0 - sum;

  for (int p = 0; p < D; ++p) {
    const int n = rng.uniform_int(1, max_block);
    std::vector<double> s;
    double level = rng.uniform(0.0, 0.2);
    for (int i = 0; i < n; ++i) {
      s.push_back(std::min(level, s_cap));
      level += rng.uniform(0.05, 0.25);
    }
    config.strategies.push_back(s);
  }
  config.tau = rng.uniform(0.5, 2.0);
  config.reward = -rng.uniform(0.01, 0.5);
  return config;
}

// Endemic instance: every class ratio lambda d (1-s) / gamma >= margin.
inline ModelConfig random_endemic(Rng& rng, double margin = 1.1,
                                  int max_populations = 3, int max_block = 4) {
  ModelConfig config = random_structure(rng, max_populations, max_block);
  config.gamma = rng.uniform(0.5, 1.5);
  double min_pressure = 1e30;
  for (std::size_t p = 0; p < config.strategies.size(); ++p)
    min_pressure = std::min(min_pressure,
                            config.degrees[p] * (1.0 - config.strategies[p].back()));
  config.lambda =
      config.gamma * margin * rng.uniform(1.0, 2.5) / min_pressure;
  return config;
}

// Disease-free instance: every class ratio <= cap < 1.
inline ModelConfig random_disease_free(Rng& rng, double cap = 0.6,
                                       int max_populations = 3, int max_block = 4) {
  ModelConfig config = random_structure(rng, max_populations, max_block);
  config.gamma = rng.uniform(0.5, 1.5);
  double max_pressure = 0.0;
  for (std::size_t p = 0; p < config.strategies.size(); ++p)
    max_pressure = std::max(max_pressure,
                            config.degrees[p] * (1.0 - config.strategies[p].front()));
  config.lambda =
      config.gamma * cap * rng.uniform(0.3, 1.0) / max_pressure;
  return config;
}

// The simultaneous least-best-response map of this game is antitone: payoffs
// depend on the social state only through the steady link-infection
// probability (decreasing in the state), and the single-crossing structure
// makes the best reply increase with it. A discrete best-response sequence
// from an extreme state is therefore monotone exactly when the best reply is
// the same profile across the achievable range of that probability, which by
// single crossing reduces to equality at the two endpoints. Instances with
// only mixed equilibria 2-cycle instead (e.g. one population with menu
// {0.19, 0.44}, lambda=2.86, gamma=1.34, r=-0.43). This generator samples the
// monotone-convergence regime, which is also where the reference experiments
// operate.
inline ModelConfig strongly_endemic(Rng& rng, int max_populations = 3,
                                    int max_block = 4) {
  auto profile_at = [](const ModelConfig& config, double theta) {
    const Eigen::VectorXd payoffs =
        payoff_from_eta(steady_infection(theta, config), config);
    const ClassIndex idx(config);
    std::vector<int> picks;
    for (int p = 0; p < idx.population_count(); ++p) {
      const auto block = payoffs.segment(idx.offset(p), idx.block_size(p));
      int best = 0;
      for (int i = 1; i < block.size(); ++i)
        if (block[i] > block[best]) best = i;
      picks.push_back(best);
    }
    return picks;
  };
  for (;;) {
    const ModelConfig config = random_endemic(rng, 2.0, max_populations, max_block);
    const auto [x_min, x_max] = extreme_states(config);
    const double theta_hi = steady_theta_bisection(x_min, config);
    const double theta_lo = steady_theta_bisection(x_max, config);
    if (profile_at(config, theta_hi) == profile_at(config, theta_lo)) return config;
  }
}

// Interior point of the product of scaled simplices, coordinates bounded
// away from zero so tangent-space perturbations stay feasible.
inline SocialState random_social_state(Rng& rng, const ModelConfig& config,
                                       double floor = 0.05) {
  const ClassIndex idx(config);
  SocialState state{Eigen::VectorXd(idx.size())};
  for (int p = 0; p < idx.population_count(); ++p) {
    const int n = idx.block_size(p);
    Eigen::VectorXd w(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += (w[i] = floor + rng.uniform(0.0, 1.0));
    state.x.segment(idx.offset(p), n) = config.masses[p] * w / total;
  }
  return state;
}

}  // namespace herd::testing

#endif
