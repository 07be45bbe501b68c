#include "herd/epidemic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace herd {

const char* to_string(StabilityRegime regime) {
  switch (regime) {
    case StabilityRegime::DiseaseFree: return "disease-free";
    case StabilityRegime::Endemic: return "endemic";
    case StabilityRegime::Mixed: return "mixed";
  }
  return "?";
}

double theta_of(const Eigen::VectorXd& infected, const SocialState& x,
                const ModelConfig& config) {
  const Eigen::VectorXd d = class_degrees(config);
  const double num = (d.array() * x.x.array() * infected.array()).sum();
  const double theta = num / average_degree(config);
  return std::clamp(theta, 0.0, 1.0);
}

Eigen::VectorXd infection_derivative(const Eigen::VectorXd& infected,
                                     const SocialState& x,
                                     const ModelConfig& config) {
  const double theta = theta_of(infected, x, config);
  const Eigen::VectorXd rates = contagion_rates(config);  // lambda d (1-s)
  return -config.gamma * infected.array() +
         rates.array() * (1.0 - infected.array()) * theta;
}

double default_step(const ModelConfig& config) {
  const int d_max = *std::max_element(config.degrees.begin(), config.degrees.end());
  return 0.01 / std::max(config.gamma, config.lambda * d_max);
}

namespace {

// Derivative with precomputed per-class rates; theta recomputed each call.
struct SiRhs {
  const Eigen::VectorXd& rates;
  const Eigen::VectorXd& dx_over_dbar;  // d_k x_k / d-bar
  double gamma;

  Eigen::VectorXd operator()(const Eigen::VectorXd& infected) const {
    const double theta = std::clamp(dx_over_dbar.dot(infected), 0.0, 1.0);
    return -gamma * infected.array() + rates.array() * (1.0 - infected.array()) * theta;
  }
};

}  // namespace

double advance_infection(
    Eigen::VectorXd& infected, const SocialState& x, const ModelConfig& config,
    double t0, double duration, double step,
    const std::function<void(double, const Eigen::VectorXd&)>& on_substep) {
  if (!(step > 0.0)) throw std::invalid_argument("advance_infection: step must be > 0");
  if (!(duration >= 0.0))
    throw std::invalid_argument("advance_infection: negative duration");
  if (duration == 0.0) return 0.0;

  const Eigen::VectorXd rates = contagion_rates(config);
  const Eigen::VectorXd dxd =
      (class_degrees(config).array() * x.x.array()) / average_degree(config);
  const SiRhs rhs{rates, dxd, config.gamma};

  const long n_steps = static_cast<long>(std::ceil(duration / step - 1e-12));
  const double h = duration / n_steps;
  double max_clamp = 0.0;

  for (long k = 0; k < n_steps; ++k) {
    const Eigen::VectorXd k1 = rhs(infected);
    const Eigen::VectorXd k2 = rhs(infected + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(infected + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(infected + h * k3);
    infected += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    for (int i = 0; i < infected.size(); ++i) {
      if (infected[i] < 0.0) {
        max_clamp = std::max(max_clamp, -infected[i]);
        infected[i] = 0.0;
      } else if (infected[i] > 1.0) {
        max_clamp = std::max(max_clamp, infected[i] - 1.0);
        infected[i] = 1.0;
      }
    }
    if (on_substep) on_substep(t0 + (k + 1) * h, infected);
  }
  return max_clamp;
}

Trajectory integrate(const Eigen::VectorXd& infected0, const SocialState& x,
                     const ModelConfig& config, double horizon, double step,
                     int store_every) {
  if (!(step > 0.0)) throw std::invalid_argument("integrate: step must be > 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("integrate: horizon must be > 0");
  if (store_every < 1) store_every = 1;
  if (infected0.minCoeff() < 0.0 || infected0.maxCoeff() > 1.0)
    throw std::invalid_argument("integrate: initial state outside [0,1]");

  const long n_steps = static_cast<long>(std::ceil(horizon / step - 1e-12));

  Trajectory traj;
  traj.times.reserve(n_steps / store_every + 2);
  Eigen::VectorXd state = infected0;
  auto record = [&](double t, const Eigen::VectorXd& s) {
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.thetas.push_back(theta_of(s, x, config));
  };
  record(0.0, state);

  long k = 0;
  traj.max_clamp = advance_infection(
      state, x, config, 0.0, horizon, step,
      [&](double t, const Eigen::VectorXd& s) {
        ++k;
        if (k % store_every == 0 || k == n_steps) record(t, s);
      });
  return traj;
}

double steady_theta_map(double z, const SocialState& x, const ModelConfig& config) {
  const Eigen::VectorXd rates = contagion_rates(config);
  const Eigen::VectorXd d = class_degrees(config);
  double acc = 0.0;
  for (int k = 0; k < rates.size(); ++k)
    acc += d[k] * x.x[k] * rates[k] * z / (config.gamma + rates[k] * z);
  return acc / average_degree(config);
}

double endemic_balance(double z, const SocialState& x, const ModelConfig& config) {
  const Eigen::VectorXd rates = contagion_rates(config);
  const Eigen::VectorXd d = class_degrees(config);
  double acc = 0.0;
  for (int k = 0; k < rates.size(); ++k)
    acc += d[k] * x.x[k] * rates[k] / (config.gamma + rates[k] * z);
  return acc;
}

double steady_theta_fixed_point(const SocialState& x, const ModelConfig& config,
                                double tol, int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("steady_theta_fixed_point: tol must be > 0");
  double z = 1.0;  // start high so the endemic fixed point is never missed
  for (int it = 0; it < max_iter; ++it) {
    const double next = steady_theta_map(z, x, config);
    const double delta = std::abs(next - z);
    z = next;
    if (delta < tol) return z < tol ? 0.0 : z;
  }
  throw SolverError("steady_theta_fixed_point: no convergence after " +
                    std::to_string(max_iter) + " iterations");
}

double steady_theta_bisection(const SocialState& x, const ModelConfig& config,
                              double tol) {
  const Eigen::VectorXd rates = contagion_rates(config);
  for (int k = 0; k < rates.size(); ++k)
    if (rates[k] < config.gamma)
      throw SolverError(
          "steady_theta_bisection: endemic condition fails for class " +
          class_label(config, k) + " (lambda d (1-s)/gamma < 1), no bracket");

  const double dbar = average_degree(config);
  double lo = 0.0, hi = 1.0;
  // Psi is strictly decreasing with Psi(0) >= dbar >= Psi(1).
  if (endemic_balance(0.0, x, config) <= dbar) return 0.0;  // boundary root
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (endemic_balance(mid, x, config) >= dbar)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd steady_infection(double theta_bar, const ModelConfig& config) {
  const Eigen::VectorXd rates = contagion_rates(config);
  Eigen::VectorXd ibar(rates.size());
  for (int k = 0; k < rates.size(); ++k)
    ibar[k] = rates[k] * theta_bar / (config.gamma + rates[k] * theta_bar);
  return ibar;
}

SteadyState steady_state(const SocialState& x, const ModelConfig& config, double tol) {
  SteadyState out;
  const double theta = steady_theta_fixed_point(x, config, tol);
  if (theta > 10.0 * tol) {
    out.kind = SteadyKind::Endemic;
    out.theta_bar = theta;
    out.infected_bar = steady_infection(theta, config);
  } else {
    out.kind = SteadyKind::DiseaseFree;
    out.theta_bar = 0.0;
    out.infected_bar = Eigen::VectorXd::Zero(ClassIndex(config).size());
  }
  return out;
}

StabilityRegime stability_regime(const ModelConfig& config) {
  const Eigen::VectorXd rates = contagion_rates(config);
  bool all_below = true, all_above = true;
  for (int k = 0; k < rates.size(); ++k) {
    const double ratio = rates[k] / config.gamma;
    if (ratio >= 1.0) all_below = false;
    if (ratio < 1.0) all_above = false;
  }
  if (all_below) return StabilityRegime::DiseaseFree;
  if (all_above) return StabilityRegime::Endemic;
  return StabilityRegime::Mixed;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const ModelConfig& config) {
  const ClassIndex idx(config);
  out << "t";
  for (int k = 0; k < idx.size(); ++k) {
    const auto [d, i] = idx.unflatten(k);
    out << ",I_" << d << "_" << i;
  }
  out << ",theta\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    put(traj.times[r]);
    for (int k = 0; k < idx.size(); ++k) {
      out << ",";
      put(traj.states[r][k]);
    }
    out << ",";
    put(traj.thetas[r]);
    out << "\n";
  }
}

}  // namespace herd
