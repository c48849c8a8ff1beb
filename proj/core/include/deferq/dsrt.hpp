#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "deferq/blocking.hpp"
#include "deferq/ctmc.hpp"
#include "deferq/model.hpp"

namespace deferq::dsrt {

/// Blocking probability of the single-server, single-deferral system under
/// deterministic rearrival spacing x:
///   rho/(1+rho) - rho (1 - e^{-(lambda+mu)x}) / ((1+rho)^2 (1 + rho(1 + lambda x))).
double blocking_single_closed_form(double lambda, double mu, double spacing);

/// Interval (1/(lambda+mu), sqrt(2)/lambda) containing the spacing that
/// minimizes the single-server, single-deferral blocking probability.
std::pair<double, double> optimal_x_bracket(double lambda, double mu);

/// Transient behaviour of the within-stage chain over one stage of length x,
/// resolved for every possible stage-start configuration: the distribution
/// over configurations at the end of the stage, and the expected time spent
/// in each configuration during the stage.
struct StageTransientBundle {
  int num_servers = 0;
  int max_deferrals = 0;  ///< D
  double spacing = 0.0;   ///< x

  /// Stage-start configurations: (K, 1) when D = 1, otherwise
  /// {(k, d) : 1 <= k <= K, 1 <= d < D}, ordered by (d, k).
  std::vector<ctmc::Config> starts;

  /// Row per start; column per within-stage configuration (see state_index).
  Eigen::MatrixXd end_distributions;
  Eigen::MatrixXd occupancies;

  int start_row(int busy, int deferred) const;
  int state_index(int busy, int deferred) const {
    return ctmc::config_index(busy, deferred, num_servers, 1);
  }
  double end_prob(int start_row_, int busy, int deferred) const {
    return end_distributions(start_row_, state_index(busy, deferred));
  }
  double occupancy(int start_row_, int busy, int deferred) const {
    return occupancies(start_row_, state_index(busy, deferred));
  }
};

StageTransientBundle stage_transients(const ValidatedParams& p, double spacing,
                                      int max_deferrals);

/// Embedded discrete-time chain of stage-start configurations across
/// successive deferral stages, closed by a dummy state that marks the end of
/// a deferral phase. The dummy state is the last index; it jumps back to
/// (K, 1) with probability one.
struct StartConfigChain {
  std::vector<ctmc::Config> starts;  ///< same order as the bundle
  ctmc::StochasticMatrix matrix;
  ctmc::DistributionVector stationary;

  int dummy_index() const { return matrix.dim() - 1; }
  double dummy_mass() const { return stationary[dummy_index()]; }
};

StartConfigChain start_config_chain(const StageTransientBundle& bundle);

/// Probabilities alpha_l, l = 1..K, that a deferral phase ends with l busy
/// servers. alpha_1..alpha_{K-1} come from the renewal-reward ratio over the
/// start chain; alpha_K is the residual.
Eigen::VectorXd phase_end_probs(const StartConfigChain& chain,
                                const StageTransientBundle& bundle);

/// Full analytic solve for one (instance, spacing) pair with effective
/// deferral limit D >= 1.
struct Analysis {
  int effective_deferrals = 0;
  StageTransientBundle bundle;
  StartConfigChain chain;
  Eigen::VectorXd alpha;
  TimeFractionTable table;
};

Analysis analyze(const ValidatedParams& p, double spacing);

/// Long-run fraction of time in each configuration (k, d) under spacing x.
/// Requires an effective deferral limit of at least one.
TimeFractionTable time_fractions(const ValidatedParams& p, double spacing);

/// Blocking probability under deterministic spacing x for general K and D.
/// Falls back to the Erlang B report when the effective deferral limit is
/// zero (the policy cannot defer anybody).
BlockingReport blocking_general(const ValidatedParams& p, double spacing);

}  // namespace deferq::dsrt
