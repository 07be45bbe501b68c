#include "herd/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "herd/rng.hpp"

namespace herd {

SocialState apply_best_responses(const Eigen::VectorXd& payoffs,
                                 const ModelConfig& config) {
  const ClassIndex idx(config);
  SocialState next{Eigen::VectorXd(idx.size())};
  for (int p = 0; p < idx.population_count(); ++p)
    next.x.segment(idx.offset(p), idx.block_size(p)) = best_response(
        payoffs.segment(idx.offset(p), idx.block_size(p)), config.masses[p]);
  return next;
}

SocialState brd_step(const SocialState& x, const ModelConfig& config) {
  return apply_best_responses(payoff_steady(x, config), config);
}

namespace {

LearningTrace brd_engine(const SocialState& x0, const ModelConfig& config,
                         double delta, int max_iter, double tol, UpdateOrder order) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("brd: delta must lie in (0,1]");
  if (!social_state_valid(x0, config))
    throw std::invalid_argument("brd: invalid initial social state");
  const ClassIndex idx(config);

  LearningTrace trace;
  SocialState x = x0;
  for (int k = 0; k <= max_iter; ++k) {
    const Eigen::VectorXd payoffs = payoff_steady(x, config);
    const SteadyState steady = steady_state(x, config);
    const NashReport report = nash_report_for(x, payoffs, config, tol);
    trace.steps.push_back({static_cast<double>(k), x, steady.infected_bar,
                           steady.theta_bar, report.max_regret});

    SocialState target{Eigen::VectorXd()};
    if (order == UpdateOrder::Simultaneous) {
      target = apply_best_responses(payoffs, config);
    } else {
      // one population at a time, repricing after every move
      target = x;
      for (int p = 0; p < idx.population_count(); ++p) {
        const Eigen::VectorXd repriced =
            p == 0 ? payoffs : payoff_steady(target, config);
        target.x.segment(idx.offset(p), idx.block_size(p)) = best_response(
            repriced.segment(idx.offset(p), idx.block_size(p)), config.masses[p]);
      }
    }
    if ((target.x - x.x).lpNorm<Eigen::Infinity>() <= tol) {
      trace.converged = true;
      break;
    }
    if (k == max_iter) break;
    x.x = delta * target.x + (1.0 - delta) * x.x;
  }
  trace.final_x = trace.steps.back().x;
  trace.iterations = static_cast<int>(trace.steps.size()) - 1;
  trace.status = trace.converged
                     ? "converged"
                     : "max_iter exhausted, last regret " +
                           std::to_string(trace.steps.back().max_regret);
  return trace;
}

}  // namespace

LearningTrace brd_run(const SocialState& x0, const ModelConfig& config, int max_iter,
                      double tol, UpdateOrder order) {
  return brd_engine(x0, config, 1.0, max_iter, tol, order);
}

LearningTrace brd_continuous(const SocialState& x0, const ModelConfig& config,
                             double delta, int max_iter, double tol,
                             UpdateOrder order) {
  return brd_engine(x0, config, delta, max_iter, tol, order);
}

namespace {

struct SwitchSpec {
  double time = 0.0;
  double bias = 0.0;  // >0 toward x_min, <0 toward x_max
};

// Linear interpolation into the integrator history for delayed reports.
class History {
 public:
  void push(double t, const Eigen::VectorXd& state) {
    times_.push_back(t);
    states_.push_back(state);
  }
  Eigen::VectorXd at(double t) const {
    if (t <= times_.front()) return states_.front();
    if (t >= times_.back()) return states_.back();
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - w) * states_[lo] + w * states_[hi];
  }

 private:
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> states_;
};

void check_schedule(const BroadcastSchedule& schedule) {
  using Mode = BroadcastSchedule::Mode;
  if (schedule.mode == Mode::Exponential && !(schedule.rate > 0.0))
    throw std::invalid_argument("broadcast schedule: rate must be > 0");
  if (schedule.mode == Mode::Fixed && !(schedule.interval > 0.0))
    throw std::invalid_argument("broadcast schedule: interval must be > 0");
  if (schedule.delay < 0.0)
    throw std::invalid_argument("broadcast schedule: negative delay");
}

CoupledTrace coupled_steady_mode(const SocialState& x0, const Eigen::VectorXd& infected0,
                                 const ModelConfig& config, double horizon) {
  CoupledTrace trace;
  SocialState x = x0;
  trace.steps.push_back(
      {0.0, x, infected0, theta_of(infected0, x, config), false, true});
  // Fast-epidemic limit: one broadcast per unit time, each one seeing the
  // steady state of the current social state.
  for (int k = 1; k <= static_cast<int>(std::floor(horizon + 1e-12)); ++k) {
    const SteadyState steady = steady_state(x, config);
    const Eigen::VectorXd payoffs = payoff_from_eta(steady.infected_bar, config);
    x = apply_best_responses(payoffs, config);
    trace.steps.push_back({static_cast<double>(k), x, steady.infected_bar,
                           steady.theta_bar, true, true});
    ++trace.event_count;
  }
  trace.final_x = x;
  trace.final_infected = trace.steps.back().infected;
  return trace;
}

CoupledTrace coupled_loop(const SocialState& x0, const Eigen::VectorXd& infected0,
                          const ModelConfig& config, const BroadcastSchedule& schedule,
                          double horizon, double out_step, double ode_step,
                          std::optional<SwitchSpec> behavior_switch) {
  using Mode = BroadcastSchedule::Mode;
  check_schedule(schedule);
  if (!(horizon > 0.0)) throw std::invalid_argument("coupled_simulate: horizon must be > 0");
  if (!social_state_valid(x0, config))
    throw std::invalid_argument("coupled_simulate: invalid initial social state");
  if (infected0.size() != ClassIndex(config).size() || infected0.minCoeff() < 0.0 ||
      infected0.maxCoeff() > 1.0)
    throw std::invalid_argument("coupled_simulate: initial infection outside [0,1]");

  if (schedule.mode == Mode::SteadyState)
    return coupled_steady_mode(x0, infected0, config, horizon);

  if (out_step <= 0.0) out_step = horizon / 1000.0;
  if (ode_step <= 0.0) ode_step = default_step(config);

  Rng rng(schedule.seed);
  auto draw_gap = [&] {
    return schedule.mode == Mode::Fixed ? schedule.interval
                                        : rng.exponential(schedule.rate);
  };

  CoupledTrace trace;
  SocialState x = x0;
  Eigen::VectorXd infected = infected0;
  History history;
  const bool keep_history = schedule.delay > 0.0;
  std::function<void(double, const Eigen::VectorXd&)> sink;
  if (keep_history) {
    history.push(0.0, infected);
    sink = [&history](double tt, const Eigen::VectorXd& s) { history.push(tt, s); };
  }

  double t = 0.0;
  double next_event = draw_gap();
  long out_index = 1;
  double next_out = out_step;
  const auto [x_min, x_max] = extreme_states(config);
  double next_switch =
      behavior_switch && behavior_switch->bias != 0.0 ? behavior_switch->time : 2.0 * horizon;

  trace.steps.push_back({0.0, x, infected, theta_of(infected, x, config), false, true});

  const double eps = 1e-12 * std::max(1.0, horizon);
  while (t < horizon - eps) {
    const double t_target =
        std::min({next_out, next_event, next_switch, horizon});
    if (t_target > t) {
      trace.max_clamp =
          std::max(trace.max_clamp, advance_infection(infected, x, config, t,
                                                      t_target - t, ode_step, sink));
      t = t_target;
    }

    bool is_event = false;
    if (next_event <= t + eps && next_event <= horizon + eps) {
      const Eigen::VectorXd reported =
          keep_history ? history.at(t - schedule.delay) : infected;
      const Eigen::VectorXd payoffs = payoff_time_dependent(reported, config);
      x = apply_best_responses(payoffs, config);
      next_event = t + draw_gap();
      is_event = true;
    }
    // The behavior override outlives a coincident broadcast.
    if (next_switch <= t + eps) {
      const double b = behavior_switch->bias;
      const SocialState& target = b > 0.0 ? x_min : x_max;
      x.x = std::abs(b) * target.x + (1.0 - std::abs(b)) * x.x;
      next_switch = 2.0 * horizon;  // one-shot
      is_event = true;
    }
    if (is_event) ++trace.event_count;

    bool on_grid = false;
    while (next_out <= t + eps) {
      on_grid = true;
      ++out_index;
      next_out = out_index * out_step;
    }
    if (is_event || on_grid || t >= horizon - eps)
      trace.steps.push_back(
          {t, x, infected, theta_of(infected, x, config), is_event, on_grid});
  }

  trace.final_x = x;
  trace.final_infected = infected;
  return trace;
}

}  // namespace

CoupledTrace coupled_simulate(const SocialState& x0, const Eigen::VectorXd& infected0,
                              const ModelConfig& config,
                              const BroadcastSchedule& schedule, double horizon,
                              double out_step, double ode_step) {
  return coupled_loop(x0, infected0, config, schedule, horizon, out_step, ode_step,
                      std::nullopt);
}

std::vector<Peak> detect_peaks(const std::vector<double>& times,
                               const std::vector<double>& values,
                               double min_separation) {
  std::vector<Peak> peaks;
  if (values.size() < 3) return peaks;
  double scale = 0.0;
  for (const double v : values) scale = std::max(scale, std::abs(v));
  const double noise = 1e-12 * scale;
  double last_accepted = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j + 1 < values.size(); ++j) {
    if (values[j] > values[j - 1] + noise && values[j] > values[j + 1] + noise) {
      if (times[j] - last_accepted >= min_separation) {
        peaks.push_back({times[j], values[j]});
        last_accepted = times[j];
      }
    }
  }
  return peaks;
}

TwoPeakResult two_peak_scenario(const ModelConfig& config, double switch_time,
                                double bias, double horizon,
                                const TwoPeakOptions& options) {
  if (bias < -1.0 || bias > 1.0)
    throw std::invalid_argument("two_peak_scenario: bias must lie in [-1,1]");
  if (bias != 0.0 && !(switch_time < horizon))
    throw std::invalid_argument("two_peak_scenario: switch_time must precede horizon");
  if (options.schedule.mode == BroadcastSchedule::Mode::SteadyState)
    throw std::invalid_argument("two_peak_scenario: needs a time-resolved schedule");

  SocialState x0 =
      options.x0 ? *options.x0
                 : brd_run(extreme_states(config).first, config).final_x;
  const Eigen::VectorXd infected0 =
      Eigen::VectorXd::Constant(ClassIndex(config).size(), options.i0);
  const double out_step = options.out_step > 0.0 ? options.out_step : horizon / 1000.0;
  const double min_sep =
      options.min_separation > 0.0 ? options.min_separation : 0.05 * horizon;

  TwoPeakResult result;
  result.trace = coupled_loop(x0, infected0, config, options.schedule, horizon,
                              out_step, options.ode_step,
                              SwitchSpec{switch_time, bias});

  const Eigen::VectorXd d = class_degrees(config);
  const Eigen::VectorXd s = class_strategies(config);
  for (const auto& row : result.trace.steps) {
    if (!row.on_grid) continue;
    // Inflow term of the dynamics weighted by x_k d_k: the rate of new
    // infections seen across links.
    const double inflow =
        config.lambda * row.theta *
        (row.x.x.array() * d.array().square() * (1.0 - s.array()) *
         (1.0 - row.infected.array()))
            .sum();
    result.grid_times.push_back(row.t);
    result.new_infection.push_back(inflow);
  }
  result.peaks = detect_peaks(result.grid_times, result.new_infection, min_sep);
  return result;
}

double gap_value(const SocialState& x, const Eigen::VectorXd& payoffs,
                 const ModelConfig& config) {
  const ClassIndex idx(config);
  double gap = 0.0;
  for (int p = 0; p < idx.population_count(); ++p) {
    const auto block = payoffs.segment(idx.offset(p), idx.block_size(p));
    const auto xb = x.x.segment(idx.offset(p), idx.block_size(p));
    gap += config.masses[p] * block.maxCoeff() - xb.dot(block);
  }
  return gap;
}

double gap_value(const SocialState& x, const ModelConfig& config) {
  return gap_value(x, payoff_steady(x, config), config);
}

Eigen::VectorXd project_scaled_simplex(const Eigen::VectorXd& v, double mass) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, tau = 0.0;
  int rho = 0;
  for (int j = 0; j < n; ++j) {
    css += u[j];
    const double candidate = (css - mass) / (j + 1);
    if (u[j] - candidate > 0.0) {
      rho = j + 1;
      tau = candidate;
    }
  }
  (void)rho;
  return (v.array() - tau).max(0.0);
}

NeOptResult ne_optimize(const SocialState& x0, const ModelConfig& config, double tol,
                        int max_iter) {
  if (!social_state_valid(x0, config))
    throw std::invalid_argument("ne_optimize: invalid initial social state");
  const ClassIndex idx(config);

  NeOptResult result;
  SocialState x = x0;
  double step = 1.0;
  bool temperature_floored = false;
  Eigen::VectorXd payoffs;

  for (int k = 0; k <= max_iter; ++k) {
    payoffs = payoff_steady(x, config);
    result.gap = gap_value(x, payoffs, config);
    const SteadyState steady = steady_state(x, config);
    const NashReport report = nash_report_for(x, payoffs, config, tol);
    result.trace.steps.push_back({static_cast<double>(k), x, steady.infected_bar,
                                  steady.theta_bar, report.max_regret});
    if (result.gap <= tol) {
      result.converged = true;
      break;
    }
    if (k == max_iter) break;

    const double temperature =
        temperature_floored ? 1e-4 : std::max(std::pow(0.5, k / 50), 1e-4);

    Eigen::MatrixXd jacobian;
    try {
      jacobian = payoff_gradient(x, config);
    } catch (const SolverError&) {
      jacobian = payoff_gradient_fd(x, config);
    }

    // Smoothed argmax weights per population, scaled to the block mass.
    Eigen::VectorXd weights(idx.size());
    for (int p = 0; p < idx.population_count(); ++p) {
      const auto block = payoffs.segment(idx.offset(p), idx.block_size(p));
      Eigen::ArrayXd e = ((block.array() - block.maxCoeff()) / temperature).exp();
      weights.segment(idx.offset(p), idx.block_size(p)) =
          config.masses[p] * (e / e.sum()).matrix();
    }
    const Eigen::VectorXd grad = jacobian.transpose() * (weights - x.x) - payoffs;

    bool accepted = false;
    double a = step;
    for (int bt = 0; bt < 40 && !accepted; ++bt) {
      SocialState candidate{Eigen::VectorXd(idx.size())};
      const Eigen::VectorXd moved = x.x - a * grad;
      for (int p = 0; p < idx.population_count(); ++p)
        candidate.x.segment(idx.offset(p), idx.block_size(p)) =
            project_scaled_simplex(
                moved.segment(idx.offset(p), idx.block_size(p)), config.masses[p]);
      if (gap_value(candidate, config) < result.gap - 1e-14) {
        x = candidate;
        step = std::min(a * 2.0, 1e3);
        accepted = true;
      } else {
        a *= 0.5;
      }
    }
    if (!accepted) {
      if (!temperature_floored && temperature > 1e-4) {
        temperature_floored = true;  // sharpen the smoothing and retry
        continue;
      }
      result.status = "stationary point above tolerance (nonconvex objective)";
      break;
    }
  }

  result.x = x;
  result.trace.final_x = x;
  result.trace.converged = result.converged;
  result.trace.iterations = static_cast<int>(result.trace.steps.size()) - 1;
  if (result.status.empty())
    result.status = result.converged ? "converged" : "max_iter exhausted";
  result.trace.status = result.status;

  result.y.resize(idx.population_count());
  for (int p = 0; p < idx.population_count(); ++p)
    result.y[p] = payoffs.segment(idx.offset(p), idx.block_size(p)).maxCoeff();
  return result;
}

namespace {

void write_joint_header(std::ostream& out, const ModelConfig& config) {
  const ClassIndex idx(config);
  out << "t";
  for (int k = 0; k < idx.size(); ++k) {
    const auto [d, i] = idx.unflatten(k);
    out << ",x_" << d << "_" << i;
  }
  for (int k = 0; k < idx.size(); ++k) {
    const auto [d, i] = idx.unflatten(k);
    out << ",I_" << d << "_" << i;
  }
  out << ",theta,event_flag\n";
}

void write_joint_row(std::ostream& out, double t, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& infected, double theta, int event) {
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  put(t);
  for (int k = 0; k < x.size(); ++k) {
    out << ",";
    put(x[k]);
  }
  for (int k = 0; k < infected.size(); ++k) {
    out << ",";
    put(infected[k]);
  }
  out << ",";
  put(theta);
  out << "," << event << "\n";
}

}  // namespace

void write_coupled_csv(std::ostream& out, const CoupledTrace& trace,
                       const ModelConfig& config) {
  write_joint_header(out, config);
  for (const auto& row : trace.steps)
    write_joint_row(out, row.t, row.x.x, row.infected, row.theta, row.event ? 1 : 0);
}

void write_learning_csv(std::ostream& out, const LearningTrace& trace,
                        const ModelConfig& config) {
  write_joint_header(out, config);
  for (std::size_t r = 0; r < trace.steps.size(); ++r) {
    const auto& row = trace.steps[r];
    write_joint_row(out, row.time, row.x.x, row.infected, row.theta, r == 0 ? 0 : 1);
  }
}

}  // namespace herd
