#pragma once

#include <Eigen/Dense>

#include "deferq/blocking.hpp"
#include "deferq/ctmc.hpp"
#include "deferq/model.hpp"

namespace deferq::esrt {

/// Level matrices of the matrix-geometric solve. Levels are the deferred
/// counts d; each level holds K+1 states. The level balance reads
///   Pi_d A(alpha) = Pi_{d+1} B(alpha)  for 1 <= d < D, and
///   Pi_0 A(0)     = Pi_1 B(alpha),
/// where column K of A carries the cut equation
/// lambda Pi_{K,d} = alpha sum_i Pi_{i,d+1} (so A(K-1, K) = 0, not -lambda;
/// this is what makes det A(0) = lambda^{K+1} and matches the full chain).
struct LevelMatrices {
  Eigen::MatrixXd A_alpha;
  Eigen::MatrixXd B_alpha;
  Eigen::MatrixXd A_zero;
  Eigen::MatrixXd R;   ///< B(alpha) A(alpha)^{-1}
  Eigen::MatrixXd R1;  ///< B(alpha) A(0)^{-1}
};

LevelMatrices build_level_matrices(const ValidatedParams& p, double rearrival_rate);

/// Stationary distribution of the exponential-spacing chain, level by level.
struct EsrtStationary {
  /// Row d = Pi_d = (Pi_{0,d}, ..., Pi_{K,d}); D+1 rows.
  Eigen::MatrixXd levels;
  double scale = 0.0;           ///< multiplicative constant c
  Eigen::VectorXd seed;         ///< V_D, last entry one
  double balance_residual = 0;  ///< max |inflow - outflow| over all states

  int num_servers() const { return static_cast<int>(levels.cols()) - 1; }
  int max_deferrals() const { return static_cast<int>(levels.rows()) - 1; }
  double at(int busy, int deferred) const { return levels(deferred, busy); }
};

/// Fast path: level-D seed, then Pi_d = Pi_{d+1} R, Pi_0 = Pi_1 R1,
/// normalized to total mass one.
EsrtStationary stationary_matrix_geometric(const ValidatedParams& p,
                                           double rearrival_rate, int max_deferrals);

/// Reference path: direct stationary solve of the full generator.
ctmc::DistributionVector stationary_full_generator(const ValidatedParams& p,
                                                   double rearrival_rate,
                                                   int max_deferrals);

enum class Method { MatrixGeometric, FullGenerator };

/// Blocking probability under exponential spacing with rate alpha. The
/// effective deferral limit is min(d-hat, floor(t-hat * alpha)); when it is
/// zero the Erlang B report is returned.
BlockingReport blocking(const ValidatedParams& p, double rearrival_rate,
                        Method method = Method::MatrixGeometric);

/// Explicit single-server formula:
///   P_B(1, D) = lambda/(lambda+mu) *
///     ((ab)^{D+1} + (b-1)(ab)^D - b) / (ab - 1 + a lambda/(lambda+mu) ((ab)^D - 1))
/// with a = lambda/alpha and b = (lambda+alpha)/(lambda+alpha+mu).
double blocking_single_server_closed_form(double lambda, double mu,
                                          double rearrival_rate, int max_deferrals);

}  // namespace deferq::esrt
