#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deferq/model.hpp"
#include "deferq/optimize.hpp"

namespace deferq::experiments {

struct SimSettings {
  std::uint64_t arrivals = 100000;
  std::uint64_t warmup = 0;  ///< raw runs by default, matching the 100k-customer protocol
  int replications = 1;
  std::uint64_t base_seed = 1;
};

/// A Halfin-Whitt experiment: for each K in k_values the arrival rate is
/// K + beta sqrt(K) and the service rate is mu. Policies with a tunable
/// parameter are optimized per K; state-independent policies are simulated.
struct SweepSpec {
  double beta = 0.1;
  std::vector<int> k_values;
  double mu = 1.0;
  double t_hat = 10.0;
  int d_hat = 1;
  std::vector<PolicyKind> policies;
  opt::Objective objective = opt::Objective::Analytic;
  SimSettings sim;
};

struct ResultRow {
  std::string policy;
  int num_servers = 0;
  double lambda = 0.0;
  std::optional<double> parameter;  ///< x or alpha; empty when not applicable
  double blocking = 0.0;
  std::optional<double> ci_halfwidth;  ///< empty for analytic rows
  std::string method;                  ///< "analytic" or "simulated"
  std::optional<std::uint64_t> seed;   ///< empty for analytic rows

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Runs the sweep on a bounded worker pool (see max_worker_threads). Rows
/// come out ordered by (policy, K) with an Erlang B group first, regardless
/// of completion order. When on_row is set it receives each row in that
/// order; on failure every row that precedes the failure is delivered before
/// the exception propagates.
std::vector<ResultRow> run_halfin_whitt_sweep(
    const SweepSpec& spec,
    const std::function<void(const ResultRow&)>& on_row = nullptr);

/// CSV with a header row, '.' decimal separator, 12 significant digits.
std::string to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);

/// DEFERQ_THREADS when set (at least 1), hardware concurrency otherwise.
int max_worker_threads();

}  // namespace deferq::experiments
