#ifndef HERD_LINEARIZE_HPP
#define HERD_LINEARIZE_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "herd/epidemic.hpp"
#include "herd/model.hpp"

namespace herd {

/// Weighted directed n-node network equivalent to the class-to-class
/// contagion flow. `weights` is the rank-1 outer product of
/// out_factor_k = d_k (1 - s_k) and in_factor_l = d_l x_l / d-bar;
/// `shifted` subtracts gamma/lambda from the diagonal, so the early
/// dynamics read dI/dt ~ lambda * shifted * I.
struct EquivalentNetwork {
  Eigen::MatrixXd weights;   // A-tilde, entrywise nonnegative
  Eigen::MatrixXd shifted;   // A = A-tilde - (gamma/lambda) Id
  Eigen::VectorXd out_factor;
  Eigen::VectorXd in_factor;
};

EquivalentNetwork equivalent_adjacency(const SocialState& x, const ModelConfig& config);

struct DominantEigenpair {
  double kappa_tilde = 0.0;  // dominant eigenvalue of the weight matrix
  double kappa = 0.0;        // shifted: kappa_tilde - gamma/lambda
  Eigen::VectorXd v;         // right eigenvector, the out factor
  double residual = 0.0;     // max-norm eigen residual of (kappa, v)
};

/// Closed-form dominant pair of the rank-1 network; every other eigenvalue
/// of the shifted matrix is -gamma/lambda.
DominantEigenpair dominant_eigenpair(const EquivalentNetwork& net,
                                     const ModelConfig& config);

/// Weight of the initial condition on the dominant mode, via oblique
/// projection along the left eigenvector (the matrix is not normal, so an
/// orthogonal projection would mix modes). Throws SolverError when the
/// left/right eigenvector pairing degenerates.
double dominant_projection(const Eigen::VectorXd& infected0, const SocialState& x,
                           const ModelConfig& config);

/// Single-mode early-epidemic approximation
/// I(t) = alpha(0) exp(lambda kappa t) v on a uniform grid.
Trajectory exponential_approx(const Eigen::VectorXd& infected0, const SocialState& x,
                              const ModelConfig& config, double horizon,
                              int grid_points);

/// Payoff derivative under the single-mode approximation:
/// DF_{kl} = -alpha0 lambda t e^(lambda kappa t) d_k (1-s_k)^2 d_l^2 (1-s_l).
/// Rank 1, entrywise nonpositive, passes the submodularity certificate.
Eigen::MatrixXd approx_payoff_gradient(const SocialState& x, double alpha0, double t,
                                       const ModelConfig& config);

/// Truncated embedding of the quadratic dynamics into a linear system over
/// Kronecker powers of the state. Block k evolves as
/// d/dt I_[k] = lambda (A_[k] I_[k] - B_[k] I_[k+1]) with the order-C
/// truncation dropping the last coupling.
class CarlemanSystem {
 public:
  int order = 0;
  int n = 0;
  double lambda = 0.0;
  std::vector<Eigen::MatrixXd> a_blocks;  // A_[1..C]
  std::vector<Eigen::MatrixXd> b_blocks;  // B_[1..C-1]
  Eigen::MatrixXd system;                 // assembled block upper-triangular matrix
  Eigen::VectorXd theta_weights;          // d_k x_k / d-bar for the base block
  int total_dim = 0;

  /// Stacks (I, I x I, ..., I^(x C)) for a base state of length n. Kronecker
  /// powers follow the flat class order lexicographically: the degree-2
  /// entry for classes (k1, k2) sits at position k1 * n + k2.
  Eigen::VectorXd extended(const Eigen::VectorXd& base) const;
};

/// Builds the blocks by the Kronecker recursion
/// A_[k] = A (x) Id + Id (x) A_[k-1]. Throws when n^(C+1) exceeds the
/// memory budget (entry count).
CarlemanSystem carleman_build(const SocialState& x, const ModelConfig& config,
                              int order, std::size_t memory_budget = 10'000'000);

/// RK4 on the stacked linear system with periodic resets that recompute the
/// extended states from the base block. Any extended entry exceeding 10 in
/// magnitude aborts with a diagnostic (truncations of unstable
/// linearizations diverge). Returns the base-block trajectory; pass
/// `extended_out` to also capture the stored full stacks.
Trajectory carleman_integrate(const Eigen::VectorXd& infected0,
                              const CarlemanSystem& system, double horizon,
                              double step, double reset_period, int store_every = 1,
                              std::vector<Eigen::VectorXd>* extended_out = nullptr);

struct NetworkEdge {
  int src = 0;
  int dst = 0;
  double weight = 0.0;
};

/// Edge list of the equivalent network; weights below the threshold are
/// omitted (columns of zero-mass classes vanish at pure equilibria).
std::vector<NetworkEdge> export_equivalent_network(const SocialState& x,
                                                   const ModelConfig& config,
                                                   double threshold = 1e-9);

/// CSV export, header `src_class,dst_class,weight`, classes labeled "d:i".
void write_edges_csv(std::ostream& out, const std::vector<NetworkEdge>& edges,
                     const ModelConfig& config);

}  // namespace herd

#endif
