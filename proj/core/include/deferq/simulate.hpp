#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <variant>

#include "deferq/model.hpp"
#include "deferq/rng.hpp"

namespace deferq::sim {

/// The part of the simulation state a deferral policy may look at: busy
/// servers and the ascending calendar of scheduled rearrival instants. The
/// time to the earliest rearrival is front() - clock.
struct SimState {
  int busy = 0;
  std::deque<double> rearrival_calendar;
  double clock = 0.0;
};

struct Defer {
  double rearrival_time;
};
struct Drop {};
using DeferralDecision = std::variant<Defer, Drop>;

/// What to do with a customer who arrives while every server is busy:
/// schedule a rearrival or drop. Only ever invoked with busy == K; the event
/// loop admits the customer itself otherwise (work conservation).
DeferralDecision deferral_decision(const ValidatedParams& p, const PolicySpec& policy,
                                   const SimState& state, double now, Rng& rng);

struct SimCounters {
  std::uint64_t arrivals = 0;  ///< counted (post-warmup) first arrivals
  std::uint64_t deferrals = 0;
  std::uint64_t dropped_on_arrival = 0;
  std::uint64_t dropped_on_rearrival = 0;
};

struct SimEstimate {
  double blocking_estimate = 0.0;
  double ci_halfwidth_95 = 0.0;
  SimCounters counters;
  std::uint64_t seed = 0;
  int replications = 1;

  /// Observed share of post-warmup time in each configuration
  /// (k busy, d deferred); (K+1) x (d_hat+1).
  Eigen::MatrixXd time_fractions;

  double std_error() const { return ci_halfwidth_95 / 1.959963984540054; }
};

/// One replication: event-driven run generating num_arrivals fresh
/// customers, of which the first warmup_arrivals are not counted. After the
/// last fresh arrival the calendar is drained so that every counted customer
/// is fully resolved. Identical inputs and seed give identical output,
/// bit for bit.
SimEstimate run_replication(const ValidatedParams& p, const PolicySpec& policy,
                            std::uint64_t num_arrivals, std::uint64_t warmup_arrivals,
                            std::uint64_t seed);

/// Independent replications on streams derived from base_seed, pooled.
/// The 95% CI uses the across-replication sample variance when there are at
/// least 10 replications, a binomial interval on the pooled counts otherwise.
/// Warmup defaults to 10% of the arrivals per replication.
SimEstimate estimate_blocking(const ValidatedParams& p, const PolicySpec& policy,
                              std::uint64_t num_arrivals, int replications,
                              std::uint64_t base_seed);
SimEstimate estimate_blocking(const ValidatedParams& p, const PolicySpec& policy,
                              std::uint64_t num_arrivals, int replications,
                              std::uint64_t base_seed, std::uint64_t warmup_arrivals);

}  // namespace deferq::sim
