#ifndef HERD_EPIDEMIC_HPP
#define HERD_EPIDEMIC_HPP

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "herd/model.hpp"

namespace herd {

/// Infected fractions per class plus the cached link-infection probability
/// (valid for the social state it was computed against).
struct EpidemicState {
  Eigen::VectorXd infected;
  double theta = 0.0;
};

enum class SteadyKind { DiseaseFree, Endemic };

struct SteadyState {
  double theta_bar = 0.0;
  Eigen::VectorXd infected_bar;
  SteadyKind kind = SteadyKind::DiseaseFree;
};

enum class StabilityRegime { DiseaseFree, Endemic, Mixed };
const char* to_string(StabilityRegime regime);

/// Probability that a random link points to an infected node:
/// sum_k d_k x_k I_k / d-bar.
double theta_of(const Eigen::VectorXd& infected, const SocialState& x,
                const ModelConfig& config);

/// Right-hand side of the per-class SI dynamics,
/// dI_k/dt = -gamma I_k + lambda (1-s_k) (1-I_k) d_k Theta.
Eigen::VectorXd infection_derivative(const Eigen::VectorXd& infected,
                                     const SocialState& x,
                                     const ModelConfig& config);

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> thetas;
  double max_clamp = 0.0;  // largest [0,1] clamp applied; > 1e-9 means the step was too large

  const Eigen::VectorXd& final_state() const { return states.back(); }
  EpidemicState state_at(std::size_t row) const {
    return {states.at(row), thetas.at(row)};
  }
};

/// Step size keeping the fastest class rate resolved: 0.01 / max(gamma, lambda*d_max).
double default_step(const ModelConfig& config);

/// Classical fixed-step RK4 over [0, horizon]; states are clamped to [0,1]
/// after every step and the largest clamp magnitude is recorded. Stores
/// every `store_every`-th step (the final state is always stored).
Trajectory integrate(const Eigen::VectorXd& infected0, const SocialState& x,
                     const ModelConfig& config, double horizon, double step,
                     int store_every = 1);

/// Advances `infected` in place by `duration` with clamped RK4 substeps of
/// size <= step. `on_substep(t0 + elapsed, infected)` fires after every
/// substep. Returns the largest clamp applied.
double advance_infection(
    Eigen::VectorXd& infected, const SocialState& x, const ModelConfig& config,
    double t0, double duration, double step,
    const std::function<void(double, const Eigen::VectorXd&)>& on_substep = {});

/// One application of the steady-state update map
/// M(z) = d-bar^-1 sum_k d_k x_k theta_k z / (gamma + theta_k z),
/// a contraction on [0,1] whose fixed point is the steady link-infection
/// probability.
double steady_theta_map(double z, const SocialState& x, const ModelConfig& config);

/// Psi(z) = sum_k d_k x_k theta_k / (gamma + theta_k z); strictly decreasing,
/// equals d-bar exactly at the positive steady state.
double endemic_balance(double z, const SocialState& x, const ModelConfig& config);

/// Fixed-point iteration of steady_theta_map from z0 = 1. Returns 0 when the
/// fixed point falls below tol. Throws SolverError on max_iter exhaustion.
double steady_theta_fixed_point(const SocialState& x, const ModelConfig& config,
                                double tol = 1e-12, int max_iter = 10000);

/// Independent route to the positive steady state: bisection of
/// endemic_balance(z) = d-bar on [0,1]. Requires the endemic condition
/// lambda d (1-s) / gamma >= 1 for every class; throws SolverError otherwise.
double steady_theta_bisection(const SocialState& x, const ModelConfig& config,
                              double tol = 1e-12);

/// Per-class steady infected fractions theta_k T / (gamma + theta_k T).
Eigen::VectorXd steady_infection(double theta_bar, const ModelConfig& config);

/// Solves for the steady pair; kind is Endemic iff theta_bar > 10*tol.
SteadyState steady_state(const SocialState& x, const ModelConfig& config,
                         double tol = 1e-12);

/// Classifies the globally stable steady state from the per-class ratios
/// lambda d (1-s) / gamma: all < 1 disease-free, all >= 1 endemic, otherwise
/// mixed (no global result applies; the caller must decide what to do).
StabilityRegime stability_regime(const ModelConfig& config);

/// CSV export, header `t,I_<d>_<i>...,theta`.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const ModelConfig& config);

}  // namespace herd

#endif
