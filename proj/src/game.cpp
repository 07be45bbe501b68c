#include "herd/game.hpp"

#include <algorithm>
#include <cmath>

namespace herd {

Observation Observation::truthful(const Eigen::VectorXd& infected_at_broadcast) {
  return {infected_at_broadcast, std::nullopt};
}

Observation Observation::misreported(double theta_tilde, const ModelConfig& config) {
  if (theta_tilde < 0.0 || theta_tilde > 1.0)
    throw std::invalid_argument("misreported theta outside [0,1]");
  return {steady_infection(theta_tilde, config), theta_tilde};
}

Eigen::VectorXd payoff_from_eta(const Eigen::VectorXd& eta, const ModelConfig& config) {
  const Eigen::VectorXd s = class_strategies(config);
  return config.reward * s.array() - (1.0 - s.array()) * eta.array();
}

Eigen::VectorXd payoff_from_observation(const Observation& obs,
                                        const ModelConfig& config) {
  return payoff_from_eta(obs.eta, config);
}

Eigen::VectorXd payoff_steady(const SocialState& x, const ModelConfig& config,
                              std::optional<double> misreported_theta,
                              double solver_tol) {
  const double theta = misreported_theta
                           ? *misreported_theta
                           : steady_theta_fixed_point(x, config, solver_tol);
  return payoff_from_eta(steady_infection(theta, config), config);
}

Eigen::VectorXd payoff_time_dependent(const Eigen::VectorXd& infected_at_broadcast,
                                      const ModelConfig& config) {
  return payoff_from_eta(infected_at_broadcast, config);
}

Eigen::MatrixXd payoff_gradient(const SocialState& x, const ModelConfig& config,
                                double solver_tol) {
  const double theta = steady_theta_fixed_point(x, config, solver_tol);
  if (theta <= 0.0)
    throw SolverError(
        "payoff_gradient: steady state is disease-free, sensitivity undefined; "
        "use payoff_gradient_fd");

  const Eigen::VectorXd rates = contagion_rates(config);
  const Eigen::VectorXd d = class_degrees(config);
  const Eigen::VectorXd s = class_strategies(config);
  const double dbar = average_degree(config);

  // d/dTheta of the steady-state balance, always negative at theta > 0.
  double j_theta = 0.0;
  for (int k = 0; k < rates.size(); ++k) {
    const double denom = config.gamma + rates[k] * theta;
    j_theta -= d[k] * x.x[k] * rates[k] * rates[k] / (denom * denom);
  }
  j_theta /= dbar;
  if (std::abs(j_theta) < 1e-12)
    throw SolverError("payoff_gradient: degenerate steady-state sensitivity");

  Eigen::VectorXd mu(rates.size()), nu(rates.size());
  for (int k = 0; k < rates.size(); ++k) {
    const double denom = config.gamma + rates[k] * theta;
    mu[k] = (1.0 - s[k]) * rates[k] / (denom * denom);
    nu[k] = d[k] * rates[k] / denom;
  }
  return (config.gamma / dbar / j_theta) * (mu * nu.transpose());
}

Eigen::MatrixXd payoff_gradient_fd(const SocialState& x, const ModelConfig& config,
                                   double h, double solver_tol) {
  const ClassIndex idx(config);
  Eigen::MatrixXd df = Eigen::MatrixXd::Zero(idx.size(), idx.size());
  for (int p = 0; p < idx.population_count(); ++p) {
    const int base = idx.offset(p);
    for (int i = 1; i < idx.block_size(p); ++i) {
      SocialState hi = x, lo = x;
      hi.x[base + i] += h;
      hi.x[base] -= h;
      lo.x[base + i] -= h;
      lo.x[base] += h;
      df.col(base + i) =
          (payoff_steady(hi, config, {}, solver_tol) -
           payoff_steady(lo, config, {}, solver_tol)) /
          (2.0 * h);
    }
  }
  return df;
}

Eigen::MatrixXd payoff_gradient_time_dependent(const Trajectory& traj,
                                               const ModelConfig& config) {
  if (traj.times.size() < 2)
    throw std::invalid_argument("payoff_gradient_time_dependent: trajectory too short");
  const Eigen::VectorXd d = class_degrees(config);
  const Eigen::VectorXd s = class_strategies(config);
  const double dbar = average_degree(config);
  const int n = static_cast<int>(d.size());

  // accum = integral of a(t) b(t)^T with a_k = (1-s_k)^2 (1-I_k), b_l = I_l.
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(n, n);
  auto slab = [&](std::size_t r) {
    const Eigen::ArrayXd one_minus_i = 1.0 - traj.states[r].array();
    const Eigen::VectorXd a = ((1.0 - s.array()).square() * one_minus_i).matrix();
    return Eigen::MatrixXd(a * traj.states[r].transpose());
  };
  Eigen::MatrixXd prev = slab(0);
  for (std::size_t r = 1; r < traj.times.size(); ++r) {
    Eigen::MatrixXd cur = slab(r);
    accum += 0.5 * (traj.times[r] - traj.times[r - 1]) * (prev + cur);
    prev.swap(cur);
  }
  return (-config.lambda / dbar) *
         (d * d.transpose()).cwiseProduct(accum);
}

SubmodularityCertificate submodularity_certificate(const Eigen::MatrixXd& jacobian,
                                                   const ModelConfig& config,
                                                   double tol) {
  const ClassIndex idx(config);
  SubmodularityCertificate cert;
  for (int p = 0; p < idx.population_count(); ++p) {
    for (int q = 0; q < idx.population_count(); ++q) {
      const int op = idx.offset(p), np = idx.block_size(p);
      const int oq = idx.offset(q), nq = idx.block_size(q);
      for (int i = 0; i + 1 < np; ++i) {
        for (int j = 0; j + 1 < nq; ++j) {
          const double v = jacobian(op + i + 1, oq + j + 1) -
                           jacobian(op + i, oq + j + 1) -
                           jacobian(op + i + 1, oq + j) + jacobian(op + i, oq + j);
          if (v > tol) {
            cert.pass = false;
            cert.violations.push_back({p, q, i, j, v});
          }
        }
      }
    }
  }
  return cert;
}

Eigen::VectorXd best_response(const Eigen::VectorXd& payoff_block, double mass) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(payoff_block.size());
  int best = 0;
  for (int i = 1; i < payoff_block.size(); ++i)
    if (payoff_block[i] > payoff_block[best]) best = i;  // ties keep the lowest index
  out[best] = mass;
  return out;
}

NashReport nash_report_for(const SocialState& x, const Eigen::VectorXd& payoffs,
                           const ModelConfig& config, double eps) {
  const ClassIndex idx(config);
  NashReport report;
  report.regrets.resize(idx.population_count());
  report.is_nash = true;
  for (int p = 0; p < idx.population_count(); ++p) {
    const auto block = payoffs.segment(idx.offset(p), idx.block_size(p));
    const auto xb = x.x.segment(idx.offset(p), idx.block_size(p));
    const double mass = config.masses[p];
    const double best = block.maxCoeff();
    const double mean = mass > 0.0 ? xb.dot(block) / mass : best;
    report.regrets[p] = best - mean;
    if (report.regrets[p] > eps) report.is_nash = false;
    for (int i = 0; i < block.size(); ++i)
      if (xb[i] > eps * mass && block[i] < best - eps) report.is_nash = false;
  }
  report.max_regret =
      report.regrets.size() > 0 ? report.regrets.maxCoeff() : 0.0;
  return report;
}

NashReport is_nash(const SocialState& x, const ModelConfig& config, double eps) {
  return nash_report_for(x, payoff_steady(x, config), config, eps);
}

namespace {

void require_common_strategy_sets(const ModelConfig& config, const char* who) {
  for (std::size_t p = 1; p < config.strategies.size(); ++p)
    if (config.strategies[p] != config.strategies[0])
      throw std::invalid_argument(std::string(who) +
                                  ": strategy sets differ across populations");
}

}  // namespace

CriticalReward critical_reward(const ModelConfig& config) {
  require_common_strategy_sets(config, "critical_reward");
  const double s_min = config.strategies[0].front();
  CriticalReward out;
  for (const int d : config.degrees) {
    const double ratio = config.lambda * d * (1.0 - s_min) / config.gamma;
    out.per_degree.push_back(1.0 - 1.0 / ((1.0 + ratio) * (1.0 + ratio)));
  }
  out.overall = *std::max_element(out.per_degree.begin(), out.per_degree.end());
  return out;
}

double payoff_slope(const ModelConfig& config, int degree, double s, double theta) {
  const double q = config.lambda * degree * (1.0 - s) / config.gamma;
  const double denom = 1.0 + theta * q;
  return config.reward + (2.0 * theta * q + theta * theta * q * q) / (denom * denom);
}

std::optional<double> dominance_check(const ModelConfig& config,
                                      std::optional<double> reported_theta) {
  require_common_strategy_sets(config, "dominance_check");
  // The slope is increasing in theta, so theta = 1 certifies dominance for
  // every possible truthful broadcast.
  const double theta = reported_theta.value_or(1.0);
  const double s_min = config.strategies[0].front();
  const double s_max = config.strategies[0].back();
  constexpr int kGrid = 1001;
  for (const int d : config.degrees) {
    for (int g = 0; g < kGrid; ++g) {
      const double s = s_min + (s_max - s_min) * g / (kGrid - 1);
      if (payoff_slope(config, d, s, theta) > 0.0) return std::nullopt;
    }
  }
  return s_min;
}

PayoffField payoff_field_steady(const SocialState& x, const ModelConfig& config) {
  PayoffField field;
  field.mode = PayoffMode::SteadyState;
  field.payoffs = payoff_steady(x, config);
  try {
    field.jacobian = payoff_gradient(x, config);
  } catch (const SolverError&) {
    field.jacobian = payoff_gradient_fd(x, config);
  }
  return field;
}

}  // namespace herd
