#include "deferq/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace deferq::sim {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr double kZ95 = 1.959963984540054;

void require_all_busy(const SimState& state, const ValidatedParams& p) {
  if (state.busy != p.num_servers()) {
    throw std::logic_error("deferral decision requested with a free server");
  }
}

}  // namespace

DeferralDecision deferral_decision(const ValidatedParams& p, const PolicySpec& policy,
                                   const SimState& state, double now, Rng& rng) {
  require_all_busy(state, p);
  const auto length = state.rearrival_calendar.size();
  const std::size_t d_hat = static_cast<std::size_t>(p.deferral_count_bound());

  switch (policy.kind) {
    case PolicyKind::NoDeferral:
      return Drop{};
    case PolicyKind::FixedMax:
      if (length < d_hat) return Defer{now + p.deferral_time_bound()};
      return Drop{};
    case PolicyKind::UniformRandom:
      if (length < d_hat) return Defer{now + rng.uniform(0.0, p.deferral_time_bound())};
      return Drop{};
    case PolicyKind::DSRT: {
      const auto limit =
          static_cast<std::size_t>(effective_deferral_limit(p, policy));
      if (length >= limit) return Drop{};
      const double base = length == 0 ? now : state.rearrival_calendar.back();
      const double rearrival = base + policy.parameter;
      // Spacing implies a total deferral of at most D x <= t-hat.
      if (rearrival - now > p.deferral_time_bound() * (1.0 + 1e-9) + 1e-9) {
        throw std::logic_error("DSRT deferral exceeds the time bound");
      }
      return Defer{rearrival};
    }
    case PolicyKind::ESRT: {
      const auto limit =
          static_cast<std::size_t>(effective_deferral_limit(p, policy));
      if (length >= limit) return Drop{};
      const double base = length == 0 ? now : state.rearrival_calendar.back();
      return Defer{base + rng.exponential(policy.parameter)};
    }
  }
  return Drop{};
}

SimEstimate run_replication(const ValidatedParams& p, const PolicySpec& policy,
                            std::uint64_t num_arrivals, std::uint64_t warmup_arrivals,
                            std::uint64_t seed) {
  if (num_arrivals <= warmup_arrivals) {
    throw InvalidHorizon("need more arrivals than the warmup discards");
  }
  validate_policy(p, policy);

  const int big_k = p.num_servers();
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();

  Rng rng(seed);
  SimState state;
  std::deque<char> counted_flags;  // parallel to state.rearrival_calendar
  std::priority_queue<double, std::vector<double>, std::greater<double>> services;

  SimCounters counters;
  Eigen::MatrixXd occupancy =
      Eigen::MatrixXd::Zero(big_k + 1, p.deferral_count_bound() + 1);

  std::uint64_t fresh_arrivals = 0;
  double next_arrival = rng.exponential(lambda);
  bool measuring = warmup_arrivals == 0;
  double measured_time = 0.0;

  enum class EventKind { Rearrival, Arrival, Service, None };

  for (;;) {
    // Next event; ties break rearrival < arrival < service.
    EventKind kind = EventKind::None;
    double when = kInfinity;
    if (!services.empty()) {
      kind = EventKind::Service;
      when = services.top();
    }
    if (fresh_arrivals < num_arrivals && next_arrival <= when) {
      kind = EventKind::Arrival;
      when = next_arrival;
    }
    if (!state.rearrival_calendar.empty() && state.rearrival_calendar.front() <= when) {
      kind = EventKind::Rearrival;
      when = state.rearrival_calendar.front();
    }
    if (kind == EventKind::None) break;
    if (fresh_arrivals >= num_arrivals && state.rearrival_calendar.empty()) {
      break;  // every counted customer is resolved; remaining services are idle
    }

    if (measuring) {
      const double dt = when - state.clock;
      occupancy(state.busy, static_cast<int>(state.rearrival_calendar.size())) += dt;
      measured_time += dt;
    }
    state.clock = when;

    switch (kind) {
      case EventKind::Rearrival: {
        const bool counted = counted_flags.front() != 0;
        state.rearrival_calendar.pop_front();
        counted_flags.pop_front();
        if (state.busy < big_k) {
          ++state.busy;
          services.push(state.clock + rng.exponential(mu));
        } else {
          counters.dropped_on_rearrival += counted ? 1 : 0;
        }
        break;
      }
      case EventKind::Arrival: {
        ++fresh_arrivals;
        const bool counted = fresh_arrivals > warmup_arrivals;
        if (counted) {
          ++counters.arrivals;
          measuring = true;
        }
        if (state.busy < big_k) {
          ++state.busy;
          services.push(state.clock + rng.exponential(mu));
        } else {
          const DeferralDecision decision =
              deferral_decision(p, policy, state, state.clock, rng);
          if (const Defer* defer = std::get_if<Defer>(&decision)) {
            // Keep the calendar ordered; state-independent policies may
            // schedule ahead of existing entries.
            const auto pos = std::upper_bound(state.rearrival_calendar.begin(),
                                              state.rearrival_calendar.end(),
                                              defer->rearrival_time);
            const auto offset = pos - state.rearrival_calendar.begin();
            state.rearrival_calendar.insert(pos, defer->rearrival_time);
            counted_flags.insert(counted_flags.begin() + offset, counted ? 1 : 0);
            counters.deferrals += counted ? 1 : 0;
          } else {
            counters.dropped_on_arrival += counted ? 1 : 0;
          }
        }
        if (fresh_arrivals < num_arrivals) {
          next_arrival = state.clock + rng.exponential(lambda);
        } else {
          next_arrival = kInfinity;
          measuring = false;  // measurement window closes with the last arrival
        }
        break;
      }
      case EventKind::Service:
        services.pop();
        --state.busy;
        break;
      case EventKind::None:
        break;
    }
  }

  SimEstimate estimate;
  estimate.counters = counters;
  estimate.seed = seed;
  estimate.replications = 1;
  const double n = static_cast<double>(counters.arrivals);
  const double blocked = static_cast<double>(counters.dropped_on_arrival +
                                             counters.dropped_on_rearrival);
  estimate.blocking_estimate = blocked / n;
  estimate.ci_halfwidth_95 =
      kZ95 * std::sqrt(std::max(0.0, estimate.blocking_estimate *
                                         (1.0 - estimate.blocking_estimate) / n));
  estimate.time_fractions =
      measured_time > 0.0 ? Eigen::MatrixXd(occupancy / measured_time) : occupancy;
  return estimate;
}

SimEstimate estimate_blocking(const ValidatedParams& p, const PolicySpec& policy,
                              std::uint64_t num_arrivals, int replications,
                              std::uint64_t base_seed) {
  return estimate_blocking(p, policy, num_arrivals, replications, base_seed,
                           num_arrivals / 10);
}

SimEstimate estimate_blocking(const ValidatedParams& p, const PolicySpec& policy,
                              std::uint64_t num_arrivals, int replications,
                              std::uint64_t base_seed, std::uint64_t warmup_arrivals) {
  if (replications < 1) throw InvalidParameter("replications", "must be at least 1");

  std::vector<SimEstimate> runs;
  runs.reserve(replications);
  for (int r = 0; r < replications; ++r) {
    runs.push_back(run_replication(p, policy, num_arrivals, warmup_arrivals,
                                   replication_seed(base_seed, r)));
  }
  if (replications == 1) {
    SimEstimate single = runs.front();
    single.seed = base_seed;
    return single;
  }

  SimEstimate pooled;
  pooled.seed = base_seed;
  pooled.replications = replications;
  pooled.time_fractions = Eigen::MatrixXd::Zero(runs.front().time_fractions.rows(),
                                                runs.front().time_fractions.cols());
  double mean = 0.0;
  for (const SimEstimate& run : runs) {
    pooled.counters.arrivals += run.counters.arrivals;
    pooled.counters.deferrals += run.counters.deferrals;
    pooled.counters.dropped_on_arrival += run.counters.dropped_on_arrival;
    pooled.counters.dropped_on_rearrival += run.counters.dropped_on_rearrival;
    pooled.time_fractions += run.time_fractions;
    mean += run.blocking_estimate;
  }
  mean /= replications;
  pooled.time_fractions /= replications;
  pooled.blocking_estimate =
      static_cast<double>(pooled.counters.dropped_on_arrival +
                          pooled.counters.dropped_on_rearrival) /
      static_cast<double>(pooled.counters.arrivals);

  if (replications >= 10) {
    double ss = 0.0;
    for (const SimEstimate& run : runs) {
      const double d = run.blocking_estimate - mean;
      ss += d * d;
    }
    const double sample_sd = std::sqrt(ss / (replications - 1));
    pooled.ci_halfwidth_95 = kZ95 * sample_sd / std::sqrt(replications);
  } else {
    const double n = static_cast<double>(pooled.counters.arrivals);
    pooled.ci_halfwidth_95 =
        kZ95 * std::sqrt(std::max(0.0, pooled.blocking_estimate *
                                           (1.0 - pooled.blocking_estimate) / n));
  }
  return pooled;
}

}  // namespace deferq::sim
