#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "deferq/errors.hpp"
#include "deferq/model.hpp"

namespace deferq {

/// Long-run fraction of time spent in each configuration (k busy, d deferred),
/// k in [0, K], d in [0, D]. Entries are non-negative and sum to one.
class TimeFractionTable {
 public:
  /// values(k, d) indexed busy-by-row, deferred-by-column.
  explicit TimeFractionTable(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw InvalidDistribution("time-fraction table must be non-empty");
    }
    for (int k = 0; k < values_.rows(); ++k) {
      for (int d = 0; d < values_.cols(); ++d) {
        if (values_(k, d) < 0.0) {
          if (values_(k, d) < -1e-9) {
            throw InvalidDistribution("negative time fraction");
          }
          values_(k, d) = 0.0;
        }
      }
    }
    if (std::abs(values_.sum() - 1.0) > 1e-8) {
      throw InvalidDistribution("time fractions must sum to one");
    }
  }

  int num_servers() const { return static_cast<int>(values_.rows()) - 1; }
  int max_deferrals() const { return static_cast<int>(values_.cols()) - 1; }
  double at(int busy, int deferred) const { return values_(busy, deferred); }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

/// Blocking probability split into its two loss paths: customers turned away
/// on first arrival (configuration (K, D)) and deferred customers dropped on
/// rearrival. total = arrival_blocked + rearrival_blocked by construction.
struct BlockingReport {
  double total = 0.0;
  double arrival_blocked = 0.0;
  double rearrival_blocked = 0.0;
  TimeFractionTable table;
  Eigen::VectorXd phase_end_probs;  ///< alpha vector; empty when not applicable
};

/// Report for the plain M/M/K/K system (the D = 0 degenerate case of every
/// policy): total = Erlang B, no rearrival losses, table = truncated Poisson.
BlockingReport erlang_b_report(const ValidatedParams& p);

}  // namespace deferq
