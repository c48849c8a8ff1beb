#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "deferq/model.hpp"

namespace deferq::opt {

enum class Objective { Analytic, Simulated };

struct OptimizationResult {
  double best_parameter = 0.0;
  double best_blocking = 1.0;
  int evaluations = 0;
  std::vector<std::pair<double, double>> trace;  ///< (parameter, blocking) pairs
};

struct Options {
  /// Search interval; (0, 0) means "use default_bounds".
  std::pair<double, double> bounds{0.0, 0.0};
  double relative_tol = 1e-4;
  int grid_points = 64;
  Objective objective = Objective::Analytic;

  // Simulated objectives reuse the same seed for every evaluation (common
  // random numbers), so the sampled objective is a fixed function.
  std::uint64_t sim_arrivals = 1'000'000;
  int sim_replications = 1;
  std::uint64_t sim_seed = 1;
};

/// Default search interval for the policy parameter. DSRT with K = d-hat = 1
/// gets the known bracket around the optimal spacing; other DSRT instances
/// get (1e-3/lambda, t-hat). ESRT gets (1/t-hat, max(4 lambda, 4/t-hat)):
/// rates below 1/t-hat are infeasible and the upper end keeps optima
/// interior across the experiment grids.
std::pair<double, double> default_bounds(const ValidatedParams& p, PolicyKind kind);

/// Minimizes the blocking probability over the scalar policy parameter
/// (spacing x for DSRT, rate alpha for ESRT): geometric grid augmented with
/// every breakpoint of the effective deferral limit, then golden-section
/// refinement around the grid minimum, never across a breakpoint.
/// Evaluations are memoized; analytic runs are deterministic.
OptimizationResult minimize_blocking(const ValidatedParams& p, PolicyKind kind,
                                     const Options& options = {});

/// Grid plus per-piece golden-section driver behind minimize_blocking,
/// usable with any objective.
OptimizationResult minimize_scalar(const std::function<double(double)>& objective,
                                   std::pair<double, double> bounds,
                                   const std::vector<double>& breakpoints,
                                   int grid_points, double relative_tol);

}  // namespace deferq::opt
