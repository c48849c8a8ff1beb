#include "deferq/blocking.hpp"

namespace deferq {

BlockingReport erlang_b_report(const ValidatedParams& p) {
  const int big_k = p.num_servers();
  const double rho = p.offered_load();

  // Truncated Poisson weights w_k = rho^k / k!, rescaled on the fly so large
  // K and rho stay in range.
  Eigen::VectorXd weights(big_k + 1);
  double w = 1.0;
  weights[0] = w;
  for (int k = 1; k <= big_k; ++k) {
    w *= rho / static_cast<double>(k);
    if (w > 1e250) {
      w *= 1e-250;
      weights.head(k) *= 1e-250;
    }
    weights[k] = w;
  }
  weights /= weights.sum();

  Eigen::MatrixXd table(big_k + 1, 1);
  table.col(0) = weights;

  BlockingReport report{/*total=*/erlang_b_blocking(big_k, rho),
                        /*arrival_blocked=*/0.0,
                        /*rearrival_blocked=*/0.0,
                        TimeFractionTable(std::move(table)),
                        Eigen::VectorXd()};
  report.arrival_blocked = report.total;
  return report;
}

}  // namespace deferq
