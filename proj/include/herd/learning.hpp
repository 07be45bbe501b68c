#ifndef HERD_LEARNING_HPP
#define HERD_LEARNING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "herd/game.hpp"
#include "herd/model.hpp"

namespace herd {

struct LearningStep {
  double time = 0.0;  // iteration index for discrete runs
  SocialState x;
  Eigen::VectorXd infected;  // epidemic snapshot the revision responded to
  double theta = 0.0;
  double max_regret = 0.0;
};

struct LearningTrace {
  std::vector<LearningStep> steps;
  bool converged = false;
  SocialState final_x;
  int iterations = 0;
  std::string status;
};

/// Simultaneous least best responses to steady-state payoffs.
SocialState brd_step(const SocialState& x, const ModelConfig& config);

/// Same update against an externally supplied payoff vector (used by the
/// coupled simulator with time-dependent payoffs).
SocialState apply_best_responses(const Eigen::VectorXd& payoffs,
                                 const ModelConfig& config);

/// All populations revise at once (the default), or one population at a
/// time in block order with payoffs refreshed after every move.
enum class UpdateOrder { Simultaneous, Sequential };

/// Iterates best responses until no class mass moves (or max_iter). When it
/// converges the final state is an exact best-response fixed point.
LearningTrace brd_run(const SocialState& x0, const ModelConfig& config,
                      int max_iter = 200, double tol = 1e-10,
                      UpdateOrder order = UpdateOrder::Simultaneous);

/// Partial-revision discretization x <- delta * BR + (1-delta) * x;
/// delta = 1 reproduces brd_run exactly.
LearningTrace brd_continuous(const SocialState& x0, const ModelConfig& config,
                             double delta, int max_iter = 10000, double tol = 1e-10,
                             UpdateOrder order = UpdateOrder::Simultaneous);

struct BroadcastSchedule {
  enum class Mode { SteadyState, Exponential, Fixed };
  Mode mode = Mode::SteadyState;
  double rate = 1.0;      // broadcasts per unit time (Exponential)
  double interval = 1.0;  // time between broadcasts (Fixed)
  double delay = 0.0;     // reporting lag: a broadcast at t reports I(t - delay)
  std::uint64_t seed = 0;
};

struct CoupledStep {
  double t = 0.0;
  SocialState x;
  Eigen::VectorXd infected;
  double theta = 0.0;
  bool event = false;    // a broadcast (or behavior switch) happened here
  bool on_grid = false;  // row belongs to the uniform output grid
};

struct CoupledTrace {
  std::vector<CoupledStep> steps;
  SocialState final_x;
  Eigen::VectorXd final_infected;
  int event_count = 0;
  double max_clamp = 0.0;
};

/// Integrates the epidemic between broadcasts; each broadcast applies
/// simultaneous best responses to the payoffs priced at the (possibly
/// delayed) reported infected fractions. Rows are stored on a uniform
/// output grid plus at every event. SteadyState mode places one broadcast
/// per unit time with the epidemic already at the steady state of the
/// current social state (the fast-epidemic limit); it reproduces brd_run.
CoupledTrace coupled_simulate(const SocialState& x0, const Eigen::VectorXd& infected0,
                              const ModelConfig& config,
                              const BroadcastSchedule& schedule, double horizon,
                              double out_step = 0.0, double ode_step = 0.0);

struct Peak {
  double t = 0.0;
  double value = 0.0;
};

/// Strict local maxima of a gridded series, accepted only when separated
/// from the previously accepted peak by at least min_separation. Maxima
/// must exceed both neighbors by a tiny noise floor so a numerically flat
/// tail cannot produce spurious peaks.
std::vector<Peak> detect_peaks(const std::vector<double>& times,
                               const std::vector<double>& values,
                               double min_separation);

struct TwoPeakOptions {
  std::optional<SocialState> x0;  // default: best-response equilibrium from x_min
  double i0 = 0.01;               // uniform initial infection
  BroadcastSchedule schedule{BroadcastSchedule::Mode::Fixed, 1.0, 1.0, 0.0, 0};
  double out_step = 0.0;         // default horizon / 1000
  double min_separation = 0.0;   // default 5% of horizon
  double ode_step = 0.0;
};

struct TwoPeakResult {
  CoupledTrace trace;
  std::vector<double> grid_times;
  std::vector<double> new_infection;  // inflow of the dynamics, weighted by x_k d_k
  std::vector<Peak> peaks;
};

/// Coupled run whose social state is pushed toward the lowest (bias > 0) or
/// highest (bias < 0) strategies at switch_time; |bias| is the convex weight
/// of the override. bias = 0 runs the unswitched control.
TwoPeakResult two_peak_scenario(const ModelConfig& config, double switch_time,
                                double bias, double horizon,
                                const TwoPeakOptions& options = {});

/// Equilibrium gap sum_d [ m_d max_i F_i - x_d . F_d ]; zero exactly at
/// Nash equilibria, positive elsewhere.
double gap_value(const SocialState& x, const Eigen::VectorXd& payoffs,
                 const ModelConfig& config);
double gap_value(const SocialState& x, const ModelConfig& config);

/// Euclidean projection onto { z >= 0, sum z = mass }.
Eigen::VectorXd project_scaled_simplex(const Eigen::VectorXd& v, double mass);

struct NeOptResult {
  SocialState x;
  Eigen::VectorXd y;  // per-population maximum payoff at the final state
  double gap = 0.0;
  LearningTrace trace;
  bool converged = false;
  std::string status;
};

/// Projected descent on the gap objective over the product of scaled
/// simplices, using the analytic payoff gradient and a log-sum-exp smoothed
/// maximum (temperature halved every 50 iterations down to 1e-4). A stall
/// above tol is reported as a stationary-but-not-global point; the
/// objective is nonconvex.
NeOptResult ne_optimize(const SocialState& x0, const ModelConfig& config,
                        double tol = 1e-8, int max_iter = 2000);

/// CSV export, header `t,x_<d>_<i>...,I_<d>_<i>...,theta,event_flag`.
void write_coupled_csv(std::ostream& out, const CoupledTrace& trace,
                       const ModelConfig& config);
void write_learning_csv(std::ostream& out, const LearningTrace& trace,
                        const ModelConfig& config);

}  // namespace herd

#endif
