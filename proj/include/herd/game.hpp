#ifndef HERD_GAME_HPP
#define HERD_GAME_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "herd/epidemic.hpp"
#include "herd/model.hpp"

namespace herd {

enum class PayoffMode { SteadyState, TimeDependent };

/// Payoff vector together with its derivative w.r.t. the social state.
struct PayoffField {
  Eigen::VectorXd payoffs;   // F, per flat class
  Eigen::MatrixXd jacobian;  // DF, n x n
  PayoffMode mode = PayoffMode::SteadyState;
  double dt = 0.0;  // broadcast interval, TimeDependent mode only
};

/// What a broadcast delivers to the players: either the true per-class
/// infected fractions, or the fractions implied by a misreported
/// link-infection probability.
struct Observation {
  Eigen::VectorXd eta;
  std::optional<double> reported_theta;

  static Observation truthful(const Eigen::VectorXd& infected_at_broadcast);
  static Observation misreported(double theta_tilde, const ModelConfig& config);
};

/// F_k = s_k r - (1 - s_k) eta_k.
Eigen::VectorXd payoff_from_eta(const Eigen::VectorXd& eta, const ModelConfig& config);
Eigen::VectorXd payoff_from_observation(const Observation& obs, const ModelConfig& config);

/// Steady-state payoffs: solves for the steady link-infection probability at
/// x (or uses the misreported value when given) and prices inactivity
/// against the implied infected fractions.
Eigen::VectorXd payoff_steady(const SocialState& x, const ModelConfig& config,
                              std::optional<double> misreported_theta = {},
                              double solver_tol = 1e-12);

/// Payoffs against the infected fractions reported at a broadcast instant.
Eigen::VectorXd payoff_time_dependent(const Eigen::VectorXd& infected_at_broadcast,
                                      const ModelConfig& config);

/// Analytic DF at the endemic steady state via the implicit function
/// theorem: a rank-1 matrix with nonpositive entries. Throws SolverError in
/// the disease-free regime (theta_bar = 0 leaves the sensitivity undefined);
/// callers can fall back to payoff_gradient_fd.
Eigen::MatrixXd payoff_gradient(const SocialState& x, const ModelConfig& config,
                                double solver_tol = 1e-12);

/// Central finite differences of payoff_steady along mass-conserving tangent
/// directions (coordinate j against the block's first strategy). Column of
/// each block's first strategy is zero; within-block column offsets are
/// irrelevant to simplex-projected descent.
Eigen::MatrixXd payoff_gradient_fd(const SocialState& x, const ModelConfig& config,
                                   double h = 1e-6, double solver_tol = 1e-14);

/// DF over one broadcast interval: trapezoid quadrature of
/// -(lambda d_k d_l / d-bar) (1-s_k)^2 (1-I_k(t)) I_l(t) on the stored grid.
Eigen::MatrixXd payoff_gradient_time_dependent(const Trajectory& traj,
                                               const ModelConfig& config);

struct SubmodularityViolation {
  int pop_row = 0, pop_col = 0;  // population indices of the offending block
  int row = 0, col = 0;          // entry within the difference product
  double value = 0.0;
};

struct SubmodularityCertificate {
  bool pass = true;
  std::vector<SubmodularityViolation> violations;
};

/// Checks the strategic-substitutes structure: for every population pair the
/// double difference of DF along adjacent strategies must be <= tol.
SubmodularityCertificate submodularity_certificate(const Eigen::MatrixXd& jacobian,
                                                   const ModelConfig& config,
                                                   double tol = 1e-10);

/// All of the population's mass on the lowest-indexed payoff maximizer.
Eigen::VectorXd best_response(const Eigen::VectorXd& payoff_block, double mass);

struct NashReport {
  bool is_nash = false;
  Eigen::VectorXd regrets;  // per population: max payoff minus mass-weighted mean
  double max_regret = 0.0;
};

/// Equilibrium test at steady-state payoffs: regrets below eps and every
/// class carrying mass within eps of the block maximum.
NashReport is_nash(const SocialState& x, const ModelConfig& config, double eps);
NashReport nash_report_for(const SocialState& x, const Eigen::VectorXd& payoffs,
                           const ModelConfig& config, double eps);

struct CriticalReward {
  std::vector<double> per_degree;
  double overall = 0.0;  // |r| above this makes the lowest strategy dominant everywhere
};

/// 1 - 1/(1 + lambda d (1-s_min)/gamma)^2 per degree. Requires identical
/// strategy sets across populations.
CriticalReward critical_reward(const ModelConfig& config);

/// Slope of the continuum payoff s -> s r - (1-s) I(s) at the given
/// link-infection probability; increasing in theta.
double payoff_slope(const ModelConfig& config, int degree, double s, double theta);

/// Returns the lowest strategy when it is dominant for every population
/// at the reported link-infection probability (worst case theta = 1 when no
/// report is supplied), certified on a 1001-point strategy grid.
std::optional<double> dominance_check(const ModelConfig& config,
                                      std::optional<double> reported_theta = {});

/// Bundles payoffs and gradient at the endemic steady state.
PayoffField payoff_field_steady(const SocialState& x, const ModelConfig& config);

}  // namespace herd

#endif
