#include "deferq/dsrt.hpp"

#include <cmath>

namespace deferq::dsrt {

namespace {

constexpr double kConsistencyTol = 1e-8;

// Renewal-reward denominator: the stationary rate of stage ends that close a
// deferral phase. Equals the dummy-state mass of the start chain up to
// numerical error.
double phase_exit_weight(const StartConfigChain& chain,
                         const StageTransientBundle& bundle) {
  double total = 0.0;
  for (std::size_t s = 0; s < bundle.starts.size(); ++s) {
    if (bundle.starts[s].deferred != 1) continue;
    double end_at_level_one = 0.0;
    for (int l = 0; l <= bundle.num_servers; ++l) {
      end_at_level_one += bundle.end_prob(static_cast<int>(s), l, 1);
    }
    total += chain.stationary[static_cast<int>(s)] * end_at_level_one;
  }
  return total;
}

}  // namespace

double blocking_single_closed_form(double lambda, double mu, double spacing) {
  if (!(lambda > 0.0) || !(mu > 0.0)) {
    throw InvalidParameter("rates", "must be positive");
  }
  if (spacing < 0.0) throw InvalidParameter("spacing", "must be non-negative");
  const double rho = lambda / mu;
  const double erlang = rho / (1.0 + rho);
  const double gain = rho * (1.0 - std::exp(-(lambda + mu) * spacing)) /
                      ((1.0 + rho) * (1.0 + rho) *
                       (1.0 + rho * (1.0 + lambda * spacing)));
  return erlang - gain;
}

std::pair<double, double> optimal_x_bracket(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) {
    throw InvalidParameter("rates", "must be positive");
  }
  return {1.0 / (lambda + mu), std::sqrt(2.0) / lambda};
}

int StageTransientBundle::start_row(int busy, int deferred) const {
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i].busy == busy && starts[i].deferred == deferred) {
      return static_cast<int>(i);
    }
  }
  throw std::out_of_range("start_row: not a stage-start configuration");
}

StageTransientBundle stage_transients(const ValidatedParams& p, double spacing,
                                      int max_deferrals) {
  if (!(spacing > 0.0) || spacing > p.deferral_time_bound()) {
    throw InvalidParameter("spacing", "must satisfy 0 < x <= deferral_time_bound");
  }
  if (max_deferrals < 1) throw InvalidParameter("max_deferrals", "must be at least 1");

  const int big_k = p.num_servers();
  const int big_d = max_deferrals;

  StageTransientBundle bundle;
  bundle.num_servers = big_k;
  bundle.max_deferrals = big_d;
  bundle.spacing = spacing;
  if (big_d == 1) {
    bundle.starts = {ctmc::Config{big_k, 1}};
  } else {
    for (int d = 1; d < big_d; ++d) {
      for (int k = 1; k <= big_k; ++k) {
        bundle.starts.push_back(ctmc::Config{k, d});
      }
    }
  }

  const ctmc::GeneratorMatrix stage = ctmc::build_stage_generator(p, big_d);
  auto [end_matrix, occupancy_matrix] = ctmc::transition_and_occupancy(stage, spacing);

  const int rows = static_cast<int>(bundle.starts.size());
  bundle.end_distributions.resize(rows, stage.dim());
  bundle.occupancies.resize(rows, stage.dim());
  for (int s = 0; s < rows; ++s) {
    const int from = bundle.state_index(bundle.starts[s].busy, bundle.starts[s].deferred);
    bundle.end_distributions.row(s) = end_matrix.row(from);
    bundle.occupancies.row(s) = occupancy_matrix.row(from);
  }
  return bundle;
}

StartConfigChain start_config_chain(const StageTransientBundle& bundle) {
  const int big_k = bundle.num_servers;
  const int big_d = bundle.max_deferrals;
  const int n_starts = static_cast<int>(bundle.starts.size());
  const int dim = n_starts + 1;
  const int dummy = n_starts;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int s = 0; s < n_starts; ++s) {
    // Stage ends in (l, m): with m >= 2 the rearriving job leaves (l', m-1)
    // as the next stage start; with m = 1 the phase is over.
    for (int d_next = 1; d_next < big_d; ++d_next) {
      for (int k_next = 1; k_next <= big_k; ++k_next) {
        double prob = bundle.end_prob(s, k_next - 1, d_next + 1);
        if (k_next == big_k) {
          prob += bundle.end_prob(s, big_k, d_next + 1);  // rearrival dropped
        }
        h(s, bundle.start_row(k_next, d_next)) += prob;
      }
    }
    double exit = 0.0;
    for (int l = 0; l <= big_k; ++l) exit += bundle.end_prob(s, l, 1);
    h(s, dummy) = exit;
  }
  h(dummy, bundle.start_row(big_k, 1)) = 1.0;

  ctmc::StochasticMatrix matrix{std::move(h)};
  ctmc::DistributionVector stationary = ctmc::dtmc_stationary(matrix);
  return StartConfigChain{bundle.starts, std::move(matrix), std::move(stationary)};
}

Eigen::VectorXd phase_end_probs(const StartConfigChain& chain,
                                const StageTransientBundle& bundle) {
  const int big_k = bundle.num_servers;
  const double denom = phase_exit_weight(chain, bundle);
  if (!(denom > 0.0)) {
    throw SingularSystem("no probability mass on phase-ending stages");
  }

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(big_k);
  for (int l = 1; l < big_k; ++l) {
    double numer = 0.0;
    for (std::size_t s = 0; s < bundle.starts.size(); ++s) {
      if (bundle.starts[s].deferred != 1) continue;
      numer += chain.stationary[static_cast<int>(s)] *
               bundle.end_prob(static_cast<int>(s), l - 1, 1);
    }
    alpha[l - 1] = numer / denom;
  }
  alpha[big_k - 1] = std::max(0.0, 1.0 - alpha.head(big_k - 1).sum());
  return alpha;
}

Analysis analyze(const ValidatedParams& p, double spacing) {
  const int big_d = effective_deferral_limit(p, PolicySpec::dsrt(spacing));
  if (big_d < 1) {
    throw InvalidParameter("spacing",
                           "effective deferral limit is zero; use the Erlang B path");
  }
  const int big_k = p.num_servers();
  const double lambda = p.arrival_rate();
  const double x = spacing;

  StageTransientBundle bundle = stage_transients(p, x, big_d);
  StartConfigChain chain = start_config_chain(bundle);
  Eigen::VectorXd alpha = phase_end_probs(chain, bundle);

  // (a) Shape of the non-deferral column from the censored chain.
  const ctmc::DistributionVector idle_shape =
      ctmc::ctmc_stationary(ctmc::build_nondeferral_generator(p, alpha));

  // (b) Shape of the deferral columns: expected per-stage occupancy weighted
  // by how often a stage starts in each configuration.
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(big_k + 1, big_d);
  for (std::size_t s = 0; s < bundle.starts.size(); ++s) {
    const double mass = chain.stationary[static_cast<int>(s)];
    for (int d = 1; d <= big_d; ++d) {
      for (int k = 0; k <= big_k; ++k) {
        weights(k, d - 1) += mass * bundle.occupancy(static_cast<int>(s), k, d);
      }
    }
  }
  const double weight_total = weights.sum();
  const double dummy_mass = chain.dummy_mass();
  const double exit_weight = phase_exit_weight(chain, bundle);

  // Two identities that must hold if the transients and the start chain are
  // mutually consistent; failure means the numerics broke down.
  if (std::abs(weight_total - x * (1.0 - dummy_mass)) >
      kConsistencyTol * std::max(1.0, x)) {
    throw ConvergenceFailure("stage occupancies inconsistent with start chain");
  }
  if (std::abs(exit_weight - dummy_mass) > kConsistencyTol) {
    throw ConvergenceFailure("phase-exit weight inconsistent with dummy mass");
  }

  // (c) Couple the two scales: the rate of entering deferral equals the rate
  // of leaving it, lambda Pi_{K,0} = (sum of deferral fractions) *
  // exit_weight / (x (1 - dummy_mass)).
  const double scale_ratio =
      lambda * idle_shape[big_k] * x * (1.0 - dummy_mass) /
      (weight_total * exit_weight);

  // (d) Normalize the grand total to one.
  const double idle_scale = 1.0 / (1.0 + scale_ratio * weight_total);
  const double deferral_scale = idle_scale * scale_ratio;

  Eigen::MatrixXd table(big_k + 1, big_d + 1);
  table.col(0) = idle_scale * idle_shape.values();
  table.rightCols(big_d) = deferral_scale * weights;

  return Analysis{big_d, std::move(bundle), std::move(chain), std::move(alpha),
                  TimeFractionTable(std::move(table))};
}

TimeFractionTable time_fractions(const ValidatedParams& p, double spacing) {
  return analyze(p, spacing).table;
}

BlockingReport blocking_general(const ValidatedParams& p, double spacing) {
  if (!(spacing > 0.0) || spacing > p.deferral_time_bound()) {
    throw InvalidParameter("spacing", "must satisfy 0 < x <= deferral_time_bound");
  }
  const int big_d = effective_deferral_limit(p, PolicySpec::dsrt(spacing));
  if (big_d < 1) return erlang_b_report(p);

  Analysis a = analyze(p, spacing);
  const int big_k = p.num_servers();

  const double arrival_blocked = a.table.at(big_k, big_d);

  // Expected number of rearrival drops per deferral phase, times the rate of
  // phases per arrival.
  double drops_per_stage = 0.0;
  for (std::size_t s = 0; s < a.bundle.starts.size(); ++s) {
    double all_busy_at_end = 0.0;
    for (int l = 1; l <= big_d; ++l) {
      all_busy_at_end += a.bundle.end_prob(static_cast<int>(s), big_k, l);
    }
    drops_per_stage += a.chain.stationary[static_cast<int>(s)] * all_busy_at_end;
  }
  const double exit_weight = phase_exit_weight(a.chain, a.bundle);
  const double rearrival_blocked =
      a.table.at(big_k, 0) * drops_per_stage / exit_weight;

  BlockingReport report{arrival_blocked + rearrival_blocked, arrival_blocked,
                        rearrival_blocked, std::move(a.table), std::move(a.alpha)};
  return report;
}

}  // namespace deferq::dsrt
