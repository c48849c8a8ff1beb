#include "deferq/esrt.hpp"

#include <cmath>

namespace deferq::esrt {

namespace {

// Max |inflow - outflow| of the full chain under the level solution, checked
// arc by arc so the generator never has to be materialized.
double balance_residual(const ValidatedParams& p, double alpha,
                        const Eigen::MatrixXd& levels) {
  const int big_k = p.num_servers();
  const int big_d = static_cast<int>(levels.rows()) - 1;
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();

  double worst = 0.0;
  for (int d = 0; d <= big_d; ++d) {
    for (int j = 0; j <= big_k; ++j) {
      const double pi = levels(d, j);
      double out = static_cast<double>(j) * mu * pi;
      if (!(j == big_k && d == big_d)) out += lambda * pi;
      if (d >= 1) out += alpha * pi;

      double in = 0.0;
      if (j >= 1) in += lambda * levels(d, j - 1);
      if (j < big_k) in += static_cast<double>(j + 1) * mu * levels(d, j + 1);
      if (d < big_d) {
        if (j >= 1) in += alpha * levels(d + 1, j - 1);
        if (j == big_k) in += alpha * levels(d + 1, big_k);
      }
      if (j == big_k && d >= 1) in += lambda * levels(d - 1, big_k);

      worst = std::max(worst, std::abs(in - out));
    }
  }
  return worst;
}

// Seed vector for the top level: the K internal balance equations of level D
// determine V up to scale; built by forward substitution from V_0, then
// rescaled so the last entry is one.
Eigen::VectorXd level_seed(const ValidatedParams& p, double alpha) {
  const int big_k = p.num_servers();
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();

  Eigen::VectorXd v(big_k + 1);
  v[0] = 1.0;
  if (big_k >= 1) v[1] = (lambda + alpha) * v[0] / mu;
  for (int j = 1; j < big_k; ++j) {
    v[j + 1] = ((lambda + j * mu + alpha) * v[j] - lambda * v[j - 1]) /
               (static_cast<double>(j + 1) * mu);
    if (v[j + 1] > 1e250) v.head(j + 2) *= 1e-250;
  }
  if (!(v[big_k] > 0.0) || !v.allFinite()) {
    throw SingularSystem("level seed is degenerate");
  }
  return v / v[big_k];
}

}  // namespace

LevelMatrices build_level_matrices(const ValidatedParams& p, double rearrival_rate) {
  if (!(rearrival_rate > 0.0)) {
    throw InvalidParameter("rearrival_rate", "must be positive");
  }
  const int big_k = p.num_servers();
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();
  const double alpha = rearrival_rate;
  const int n = big_k + 1;

  // Column j < K carries the balance equation of state (j, d); column K
  // carries the level cut lambda Pi_{K,d} = alpha sum_i Pi_{i,d+1}.
  auto build_a = [&](double a) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < big_k; ++j) m(j, j) = lambda + j * mu + a;
    m(big_k, big_k) = lambda;
    for (int j = 1; j < big_k; ++j) m(j - 1, j) = -lambda;
    for (int j = 1; j <= big_k; ++j) m(j, j - 1) = -static_cast<double>(j) * mu;
    return m;
  };

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (int j = 1; j < big_k; ++j) b(j - 1, j) = alpha;
  b.col(big_k).setConstant(alpha);

  LevelMatrices lm;
  lm.A_alpha = build_a(alpha);
  lm.A_zero = build_a(0.0);
  lm.B_alpha = std::move(b);

  // R solves R A = B, i.e. A^T R^T = B^T.
  Eigen::FullPivLU<Eigen::MatrixXd> lu_alpha(lm.A_alpha.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu_zero(lm.A_zero.transpose());
  if (!lu_alpha.isInvertible() || !lu_zero.isInvertible()) {
    throw SingularSystem("level matrix is singular");
  }
  lm.R = lu_alpha.solve(lm.B_alpha.transpose()).transpose();
  lm.R1 = lu_zero.solve(lm.B_alpha.transpose()).transpose();
  return lm;
}

EsrtStationary stationary_matrix_geometric(const ValidatedParams& p,
                                           double rearrival_rate, int max_deferrals) {
  if (max_deferrals < 1) throw InvalidParameter("max_deferrals", "must be at least 1");
  const int big_k = p.num_servers();
  const int big_d = max_deferrals;

  const LevelMatrices lm = build_level_matrices(p, rearrival_rate);
  const Eigen::VectorXd seed = level_seed(p, rearrival_rate);

  Eigen::MatrixXd levels(big_d + 1, big_k + 1);
  levels.row(big_d) = seed.transpose();
  for (int d = big_d - 1; d >= 1; --d) {
    levels.row(d) = levels.row(d + 1) * lm.R;
  }
  levels.row(0) = levels.row(1) * lm.R1;

  const double total = levels.sum();
  if (!(total > 0.0) || !levels.allFinite()) {
    throw SingularSystem("level recursion degenerated");
  }
  const double scale = 1.0 / total;
  levels *= scale;

  for (int d = 0; d <= big_d; ++d) {
    for (int j = 0; j <= big_k; ++j) {
      if (levels(d, j) < 0.0) {
        if (levels(d, j) < -1e-12) {
          throw NegativeProbability("stationary level entry below -1e-12");
        }
        levels(d, j) = 0.0;
      }
    }
  }

  EsrtStationary out;
  out.levels = std::move(levels);
  out.scale = scale;
  out.seed = seed;
  out.balance_residual = balance_residual(p, rearrival_rate, out.levels);

  const double rate_scale = std::max(
      1.0, p.arrival_rate() + big_k * p.service_rate() + rearrival_rate);
  if (out.balance_residual > 1e-8 * rate_scale) {
    throw ConvergenceFailure("matrix-geometric solution violates balance");
  }
  return out;
}

ctmc::DistributionVector stationary_full_generator(const ValidatedParams& p,
                                                   double rearrival_rate,
                                                   int max_deferrals) {
  return ctmc::ctmc_stationary(
      ctmc::build_esrt_generator(p, rearrival_rate, max_deferrals));
}

BlockingReport blocking(const ValidatedParams& p, double rearrival_rate,
                        Method method) {
  if (!(rearrival_rate > 0.0)) {
    throw InvalidParameter("rearrival_rate", "must be positive");
  }
  const int big_d = effective_deferral_limit(p, PolicySpec::esrt(rearrival_rate));
  if (big_d < 1) return erlang_b_report(p);

  const int big_k = p.num_servers();
  Eigen::MatrixXd levels;
  if (method == Method::MatrixGeometric) {
    levels = stationary_matrix_geometric(p, rearrival_rate, big_d).levels;
  } else {
    const ctmc::DistributionVector pi =
        stationary_full_generator(p, rearrival_rate, big_d);
    levels.resize(big_d + 1, big_k + 1);
    for (int d = 0; d <= big_d; ++d) {
      for (int k = 0; k <= big_k; ++k) {
        levels(d, k) = pi[ctmc::config_index(k, d, big_k, 0)];
      }
    }
  }

  const double arrival_blocked = levels(big_d, big_k);
  const double rearrival_blocked = rearrival_rate / p.arrival_rate() *
                                   levels.col(big_k).tail(big_d).sum();

  BlockingReport report{arrival_blocked + rearrival_blocked,
                        arrival_blocked,
                        rearrival_blocked,
                        TimeFractionTable(levels.transpose()),
                        Eigen::VectorXd()};
  return report;
}

double blocking_single_server_closed_form(double lambda, double mu,
                                          double rearrival_rate, int max_deferrals) {
  if (!(lambda > 0.0) || !(mu > 0.0) || !(rearrival_rate > 0.0)) {
    throw InvalidParameter("rates", "must be positive");
  }
  if (max_deferrals < 1) throw InvalidParameter("max_deferrals", "must be at least 1");
  const double alpha = rearrival_rate;
  const int big_d = max_deferrals;

  const double a = lambda / alpha;
  const double b = (lambda + alpha) / (lambda + alpha + mu);
  const double erlang = lambda / (lambda + mu);

  // ab - 1 in cancellation-free form; g_n = (ab)^n - 1 via expm1 so the
  // ab -> 1 case stays well conditioned.
  const double eps = (lambda * lambda - alpha * mu - alpha * alpha) /
                     (alpha * (lambda + alpha + mu));
  const double log_ab = std::log1p(eps);
  if (static_cast<double>(big_d + 1) * log_ab > 600.0) {
    return b;  // (ab)^D dominance limit
  }
  const double g_d = std::expm1(big_d * log_ab);
  const double g_d1 = std::expm1((big_d + 1) * log_ab);

  const double numer = g_d1 + (b - 1.0) * g_d;
  const double denom = eps + a * erlang * g_d;
  return erlang * numer / denom;
}

}  // namespace deferq::esrt
