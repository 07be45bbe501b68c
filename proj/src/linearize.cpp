#include "herd/linearize.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <cstdio>
#include <ostream>

namespace herd {

EquivalentNetwork equivalent_adjacency(const SocialState& x, const ModelConfig& config) {
  if (!social_state_valid(x, config))
    throw std::invalid_argument("equivalent_adjacency: invalid social state");
  EquivalentNetwork net;
  const Eigen::VectorXd d = class_degrees(config);
  const Eigen::VectorXd s = class_strategies(config);
  net.out_factor = d.array() * (1.0 - s.array());
  net.in_factor = d.array() * x.x.array() / average_degree(config);
  net.weights = net.out_factor * net.in_factor.transpose();
  net.shifted = net.weights - (config.gamma / config.lambda) *
                                  Eigen::MatrixXd::Identity(d.size(), d.size());
  return net;
}

DominantEigenpair dominant_eigenpair(const EquivalentNetwork& net,
                                     const ModelConfig& config) {
  DominantEigenpair pair;
  pair.kappa_tilde = net.in_factor.dot(net.out_factor);
  pair.kappa = pair.kappa_tilde - config.gamma / config.lambda;
  pair.v = net.out_factor;
  pair.residual =
      (net.shifted * pair.v - pair.kappa * pair.v).lpNorm<Eigen::Infinity>();
  return pair;
}

double dominant_projection(const Eigen::VectorXd& infected0, const SocialState& x,
                           const ModelConfig& config) {
  const EquivalentNetwork net = equivalent_adjacency(x, config);
  const double pairing = net.in_factor.dot(net.out_factor);
  if (std::abs(pairing) < 1e-14)
    throw SolverError(
        "dominant_projection: left/right eigenvector pairing is degenerate");
  return net.in_factor.dot(infected0) / pairing;
}

Trajectory exponential_approx(const Eigen::VectorXd& infected0, const SocialState& x,
                              const ModelConfig& config, double horizon,
                              int grid_points) {
  if (grid_points < 2)
    throw std::invalid_argument("exponential_approx: need at least 2 grid points");
  if (!(horizon > 0.0))
    throw std::invalid_argument("exponential_approx: horizon must be > 0");
  const EquivalentNetwork net = equivalent_adjacency(x, config);
  const DominantEigenpair pair = dominant_eigenpair(net, config);
  const double alpha0 = dominant_projection(infected0, x, config);

  Trajectory traj;
  traj.times.reserve(grid_points);
  for (int g = 0; g < grid_points; ++g) {
    const double t = horizon * g / (grid_points - 1);
    const Eigen::VectorXd state =
        alpha0 * std::exp(config.lambda * pair.kappa * t) * pair.v;
    traj.times.push_back(t);
    traj.states.push_back(state);
    traj.thetas.push_back(net.in_factor.dot(state));
  }
  return traj;
}

Eigen::MatrixXd approx_payoff_gradient(const SocialState& x, double alpha0, double t,
                                       const ModelConfig& config) {
  const EquivalentNetwork net = equivalent_adjacency(x, config);
  const DominantEigenpair pair = dominant_eigenpair(net, config);
  const Eigen::VectorXd d = class_degrees(config);
  const Eigen::VectorXd s = class_strategies(config);
  const double scale =
      -alpha0 * config.lambda * t * std::exp(config.lambda * pair.kappa * t);
  const Eigen::VectorXd row = d.array() * (1.0 - s.array()).square();
  const Eigen::VectorXd col = d.array().square() * (1.0 - s.array());
  return scale * (row * col.transpose());
}

Eigen::VectorXd CarlemanSystem::extended(const Eigen::VectorXd& base) const {
  if (base.size() != n)
    throw std::invalid_argument("CarlemanSystem::extended: wrong base size");
  Eigen::VectorXd stack(total_dim);
  Eigen::VectorXd power = base;
  int off = 0;
  for (int k = 1; k <= order; ++k) {
    stack.segment(off, power.size()) = power;
    off += static_cast<int>(power.size());
    if (k < order) power = Eigen::kroneckerProduct(base, power).eval();
  }
  return stack;
}

CarlemanSystem carleman_build(const SocialState& x, const ModelConfig& config,
                              int order, std::size_t memory_budget) {
  if (order < 1) throw std::invalid_argument("carleman_build: order must be >= 1");
  const ClassIndex idx(config);
  const int n = idx.size();
  double entries = 1.0;
  for (int k = 0; k <= order; ++k) entries *= n;
  if (entries > static_cast<double>(memory_budget))
    throw std::invalid_argument(
        "carleman_build: n^(C+1) = " + std::to_string(entries) +
        " exceeds the memory budget of " + std::to_string(memory_budget));

  const EquivalentNetwork net = equivalent_adjacency(x, config);

  CarlemanSystem sys;
  sys.order = order;
  sys.n = n;
  sys.lambda = config.lambda;
  sys.theta_weights = net.in_factor;

  // Base quadratic coupling: row k carries the A-tilde row at columns
  // (k', k), i.e. B_(k,(k',k'')) = A-tilde_(k,k') when k'' = k.
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n * n);
  for (int k = 0; k < n; ++k)
    for (int kp = 0; kp < n; ++kp) b(k, kp * n + k) = net.weights(k, kp);

  sys.a_blocks.push_back(net.shifted);
  if (order > 1) sys.b_blocks.push_back(b);
  for (int k = 2; k <= order; ++k) {
    const int prev = static_cast<int>(std::pow(n, k - 1));
    const Eigen::MatrixXd id_prev = Eigen::MatrixXd::Identity(prev, prev);
    const Eigen::MatrixXd id_n = Eigen::MatrixXd::Identity(n, n);
    sys.a_blocks.push_back(Eigen::kroneckerProduct(net.shifted, id_prev).eval() +
                           Eigen::kroneckerProduct(id_n, sys.a_blocks.back()).eval());
    if (k < order)
      sys.b_blocks.push_back(Eigen::kroneckerProduct(b, id_prev).eval() +
                             Eigen::kroneckerProduct(id_n, sys.b_blocks.back()).eval());
  }

  sys.total_dim = 0;
  for (const auto& blk : sys.a_blocks) sys.total_dim += static_cast<int>(blk.rows());
  sys.system = Eigen::MatrixXd::Zero(sys.total_dim, sys.total_dim);
  int off = 0;
  for (int k = 0; k < order; ++k) {
    const int rows = static_cast<int>(sys.a_blocks[k].rows());
    sys.system.block(off, off, rows, rows) = sys.a_blocks[k];
    if (k + 1 < order) {
      const int cols = static_cast<int>(sys.b_blocks[k].cols());
      sys.system.block(off, off + rows, rows, cols) = -sys.b_blocks[k];
    }
    off += rows;
  }
  return sys;
}

Trajectory carleman_integrate(const Eigen::VectorXd& infected0,
                              const CarlemanSystem& sys, double horizon, double step,
                              double reset_period, int store_every,
                              std::vector<Eigen::VectorXd>* extended_out) {
  if (!(step > 0.0))
    throw std::invalid_argument("carleman_integrate: step must be > 0");
  if (!(horizon > 0.0))
    throw std::invalid_argument("carleman_integrate: horizon must be > 0");
  if (reset_period < step)
    throw std::invalid_argument("carleman_integrate: reset_period must be >= step");
  if (infected0.size() != sys.n || infected0.minCoeff() < 0.0 ||
      infected0.maxCoeff() > 1.0)
    throw std::invalid_argument("carleman_integrate: initial state outside [0,1]");
  if (store_every < 1) store_every = 1;

  const Eigen::MatrixXd generator = sys.lambda * sys.system;
  Eigen::VectorXd z = sys.extended(infected0);

  const long n_steps = static_cast<long>(std::ceil(horizon / step - 1e-12));
  const double h = horizon / n_steps;

  Trajectory traj;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(z.head(sys.n));
    traj.thetas.push_back(sys.theta_weights.dot(z.head(sys.n)));
    if (extended_out) extended_out->push_back(z);
  };
  record(0.0);

  double next_reset = reset_period;
  for (long k = 0; k < n_steps; ++k) {
    const Eigen::VectorXd k1 = generator * z;
    const Eigen::VectorXd k2 = generator * (z + 0.5 * h * k1);
    const Eigen::VectorXd k3 = generator * (z + 0.5 * h * k2);
    const Eigen::VectorXd k4 = generator * (z + h * k3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t = (k + 1) * h;

    const double worst = z.cwiseAbs().maxCoeff();
    if (worst > 10.0)
      throw SolverError("carleman_integrate: extended state blew up to " +
                        std::to_string(worst) + " at t = " + std::to_string(t) +
                        "; raise the order or shorten the reset period");

    if (t + 1e-12 >= next_reset) {
      z = sys.extended(z.head(sys.n));
      while (next_reset <= t + 1e-12) next_reset += reset_period;
    }
    if ((k + 1) % store_every == 0 || k + 1 == n_steps) record(t);
  }
  return traj;
}

std::vector<NetworkEdge> export_equivalent_network(const SocialState& x,
                                                   const ModelConfig& config,
                                                   double threshold) {
  const EquivalentNetwork net = equivalent_adjacency(x, config);
  std::vector<NetworkEdge> edges;
  for (int src = 0; src < net.weights.rows(); ++src)
    for (int dst = 0; dst < net.weights.cols(); ++dst)
      if (net.weights(src, dst) >= threshold)
        edges.push_back({src, dst, net.weights(src, dst)});
  return edges;
}

void write_edges_csv(std::ostream& out, const std::vector<NetworkEdge>& edges,
                     const ModelConfig& config) {
  out << "src_class,dst_class,weight\n";
  char buf[32];
  for (const auto& e : edges) {
    std::snprintf(buf, sizeof buf, "%.17g", e.weight);
    out << class_label(config, e.src) << "," << class_label(config, e.dst) << ","
        << buf << "\n";
  }
}

}  // namespace herd
