#include "deferq/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "deferq/dsrt.hpp"
#include "deferq/esrt.hpp"
#include "deferq/simulate.hpp"

namespace deferq::opt {

namespace {

class MemoizedObjective {
 public:
  explicit MemoizedObjective(const std::function<double(double)>& fn) : fn_(fn) {}

  double operator()(double x) {
    auto it = cache_.find(x);
    if (it != cache_.end()) return it->second;
    const double value = fn_(x);
    cache_.emplace(x, value);
    trace_.emplace_back(x, value);
    return value;
  }

  int evaluations() const { return static_cast<int>(cache_.size()); }
  const std::vector<std::pair<double, double>>& trace() const { return trace_; }

 private:
  const std::function<double(double)>& fn_;
  std::map<double, double> cache_;
  std::vector<std::pair<double, double>> trace_;
};

// Standard golden-section shrink of [a, b]; every probe goes through eval.
void golden_refine(MemoizedObjective& eval, double a, double b, double tol) {
  static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  if (!(b > a)) return;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
}

}  // namespace

std::pair<double, double> default_bounds(const ValidatedParams& p, PolicyKind kind) {
  const double t_hat = p.deferral_time_bound();
  if (kind == PolicyKind::DSRT) {
    if (p.num_servers() == 1 && p.deferral_count_bound() == 1) {
      auto [lo, hi] = dsrt::optimal_x_bracket(p.arrival_rate(), p.service_rate());
      return {std::min(lo, t_hat), std::min(hi, t_hat)};
    }
    return {1e-3 / p.arrival_rate(), t_hat};
  }
  if (kind == PolicyKind::ESRT) {
    return {1.0 / t_hat, std::max(4.0 * p.arrival_rate(), 4.0 / t_hat)};
  }
  throw InvalidParameter("policy", "only DSRT and ESRT have a tunable parameter");
}

OptimizationResult minimize_scalar(const std::function<double(double)>& objective,
                                   std::pair<double, double> bounds,
                                   const std::vector<double>& breakpoints,
                                   int grid_points, double relative_tol) {
  const auto [lo, hi] = bounds;
  if (!(lo > 0.0) || !(hi > lo)) throw EmptyBounds("need 0 < lower < upper");
  if (grid_points < 2) throw InvalidParameter("grid_points", "must be at least 2");

  std::vector<double> grid;
  grid.reserve(grid_points + breakpoints.size());
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / (grid_points - 1);
  for (int i = 0; i < grid_points; ++i) {
    grid.push_back(std::exp(log_lo + i * step));
  }
  grid.front() = lo;
  grid.back() = hi;
  for (double b : breakpoints) {
    if (b > lo && b < hi) grid.push_back(b);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) {
                           return std::abs(a - b) <= 1e-12 * std::max(a, b);
                         }),
             grid.end());

  MemoizedObjective eval(objective);
  std::size_t best = 0;
  double best_value = eval(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = eval(grid[i]);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }

  // Refine on both grid cells adjacent to the minimum. Breakpoints are grid
  // points, so neither cell straddles a discontinuity.
  const double tol = relative_tol * grid[best];
  if (best > 0) golden_refine(eval, grid[best - 1], grid[best], tol);
  if (best + 1 < grid.size()) golden_refine(eval, grid[best], grid[best + 1], tol);

  OptimizationResult result;
  result.trace = eval.trace();
  result.evaluations = eval.evaluations();
  result.best_parameter = result.trace.front().first;
  result.best_blocking = result.trace.front().second;
  for (const auto& [param, value] : result.trace) {
    if (value < result.best_blocking ||
        (value == result.best_blocking && param < result.best_parameter)) {
      result.best_blocking = value;
      result.best_parameter = param;
    }
  }
  return result;
}

OptimizationResult minimize_blocking(const ValidatedParams& p, PolicyKind kind,
                                     const Options& options) {
  if (kind != PolicyKind::DSRT && kind != PolicyKind::ESRT) {
    throw InvalidParameter("policy", "only DSRT and ESRT have a tunable parameter");
  }

  std::pair<double, double> bounds = options.bounds;
  if (bounds.first == 0.0 && bounds.second == 0.0) {
    bounds = default_bounds(p, kind);
  }

  // The effective deferral limit jumps at t-hat/j (DSRT) or j/t-hat (ESRT);
  // pin those so the grid never skips a continuity piece.
  std::vector<double> breakpoints;
  for (int j = 1; j <= p.deferral_count_bound(); ++j) {
    breakpoints.push_back(kind == PolicyKind::DSRT
                              ? p.deferral_time_bound() / j
                              : static_cast<double>(j) / p.deferral_time_bound());
  }

  std::function<double(double)> objective;
  if (options.objective == Objective::Analytic) {
    if (kind == PolicyKind::DSRT) {
      objective = [&p](double x) { return dsrt::blocking_general(p, x).total; };
    } else {
      objective = [&p](double a) { return esrt::blocking(p, a).total; };
    }
  } else {
    objective = [&p, kind, &options](double param) {
      return sim::estimate_blocking(p, PolicySpec{kind, param},
                                    options.sim_arrivals, options.sim_replications,
                                    options.sim_seed)
          .blocking_estimate;
    };
  }

  return minimize_scalar(objective, bounds, breakpoints, options.grid_points,
                         options.relative_tol);
}

}  // namespace deferq::opt
