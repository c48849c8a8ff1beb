#include "deferq/ctmc.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace deferq::ctmc {

namespace {

constexpr double kGeneratorRowSumTol = 1e-12;
constexpr double kStochasticRowSumTol = 1e-10;
constexpr double kDistributionSumTol = 1e-10;
constexpr double kOccupancySumTol = 1e-8;
constexpr double kNegativeSlack = 1e-9;

// Strong connectivity on the nonzero off-diagonal pattern: everything
// reachable from state 0 forwards and backwards.
bool strongly_connected(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  if (n <= 1) return true;
  auto reach = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (v == u || seen[v]) continue;
        const double w = transpose ? m(v, u) : m(u, v);
        if (w != 0.0) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reach(false) && reach(true);
}

// Solves x^T A = 0 (or x^T (P - I) = 0) with the last balance equation
// replaced by normalization, then polishes with one refinement step.
Vector stationary_solve(const Matrix& balance_transposed) {
  const int n = static_cast<int>(balance_transposed.rows());
  Matrix a = balance_transposed;
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b[n - 1] = 1.0;

  Eigen::PartialPivLU<Matrix> lu(a);
  Vector pi = lu.solve(b);
  Vector correction = lu.solve(b - a * pi);
  pi += correction;

  if (!pi.allFinite()) throw SingularSystem("stationary solve produced non-finite values");
  const double total = pi.sum();
  if (!(std::abs(total) > 1e-300)) {
    throw SingularSystem("stationary solve degenerated to the zero vector");
  }
  pi /= total;
  return pi;
}

Vector clip_small_negatives(Vector v, double slack) {
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) {
      if (v[i] < -slack) {
        throw InvalidDistribution("vector entry " + std::to_string(i) +
                                  " is negative beyond tolerance");
      }
      v[i] = 0.0;
    }
  }
  return v;
}

}  // namespace

int config_index(int busy, int deferred, int num_servers, int deferred_min) {
  if (busy < 0 || busy > num_servers || deferred < deferred_min) {
    throw std::out_of_range("config_index: configuration out of range");
  }
  return (deferred - deferred_min) * (num_servers + 1) + busy;
}

Config config_at(int index, int num_servers, int deferred_min) {
  if (index < 0) throw std::out_of_range("config_at: negative index");
  const int width = num_servers + 1;
  return Config{index % width, index / width + deferred_min};
}

GeneratorMatrix::GeneratorMatrix(Matrix rates) : rates_(std::move(rates)) {
  if (rates_.rows() != rates_.cols() || rates_.rows() == 0) {
    throw InvalidParameter("generator", "must be square and non-empty");
  }
  const int n = dim();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && rates_(i, j) < 0.0) {
        throw InvalidParameter("generator", "negative off-diagonal rate");
      }
    }
    const double scale = std::max(1.0, rates_.row(i).cwiseAbs().maxCoeff());
    if (std::abs(rates_.row(i).sum()) > kGeneratorRowSumTol * scale) {
      throw InvalidParameter("generator", "row " + std::to_string(i) +
                                              " does not sum to zero");
    }
  }
}

StochasticMatrix::StochasticMatrix(Matrix probabilities)
    : probs_(std::move(probabilities)) {
  if (probs_.rows() != probs_.cols() || probs_.rows() == 0) {
    throw InvalidParameter("stochastic matrix", "must be square and non-empty");
  }
  const int n = dim();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (probs_(i, j) < 0.0) {
        if (probs_(i, j) < -kNegativeSlack) {
          throw InvalidParameter("stochastic matrix", "negative entry");
        }
        probs_(i, j) = 0.0;
      } else if (probs_(i, j) > 1.0 + kStochasticRowSumTol) {
        throw InvalidParameter("stochastic matrix", "entry above one");
      }
    }
    if (std::abs(probs_.row(i).sum() - 1.0) > kStochasticRowSumTol) {
      throw InvalidParameter("stochastic matrix",
                             "row " + std::to_string(i) + " does not sum to one");
    }
  }
}

DistributionVector::DistributionVector(Vector probabilities)
    : probs_(std::move(probabilities)) {
  if (probs_.size() == 0) throw InvalidDistribution("empty distribution");
  probs_ = clip_small_negatives(std::move(probs_), kNegativeSlack);
  if (std::abs(probs_.sum() - 1.0) > kDistributionSumTol) {
    throw InvalidDistribution("distribution does not sum to one");
  }
}

DistributionVector DistributionVector::unit(int dim, int index) {
  if (index < 0 || index >= dim) throw std::out_of_range("unit: index out of range");
  Vector v = Vector::Zero(dim);
  v[index] = 1.0;
  return DistributionVector(std::move(v));
}

OccupancyVector::OccupancyVector(Vector times, double horizon)
    : times_(std::move(times)), horizon_(horizon) {
  if (!(horizon_ > 0.0)) throw InvalidParameter("horizon", "must be positive");
  times_ = clip_small_negatives(std::move(times_), kNegativeSlack * horizon_);
  if (std::abs(times_.sum() - horizon_) > kOccupancySumTol * std::max(1.0, horizon_)) {
    throw InvalidDistribution("occupancy does not sum to the horizon");
  }
}

GeneratorMatrix build_stage_generator(const ValidatedParams& p, int max_deferrals) {
  if (max_deferrals < 1) throw InvalidParameter("max_deferrals", "must be at least 1");
  const int big_k = p.num_servers();
  const int big_d = max_deferrals;
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();
  const int dim = (big_k + 1) * big_d;

  Matrix q = Matrix::Zero(dim, dim);
  for (int d = 1; d <= big_d; ++d) {
    for (int k = 0; k <= big_k; ++k) {
      const int row = config_index(k, d, big_k, 1);
      if (k < big_k) q(row, config_index(k + 1, d, big_k, 1)) += lambda;
      if (k > 0) q(row, config_index(k - 1, d, big_k, 1)) += k * mu;
      if (k == big_k && d < big_d) q(row, config_index(big_k, d + 1, big_k, 1)) += lambda;
      // Arrivals at (K, D) are blocked on the spot: no transition.
    }
  }
  q.diagonal() = -q.rowwise().sum();
  return GeneratorMatrix(std::move(q));
}

GeneratorMatrix build_nondeferral_generator(const ValidatedParams& p,
                                            const Vector& phase_end_probs) {
  const int big_k = p.num_servers();
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();
  if (phase_end_probs.size() != big_k) {
    throw InvalidDistribution("phase-end probabilities must have length K");
  }
  if ((phase_end_probs.array() < -1e-12).any() ||
      std::abs(phase_end_probs.sum() - 1.0) > 1e-9) {
    throw InvalidDistribution("phase-end probabilities must be a distribution");
  }

  Matrix q = Matrix::Zero(big_k + 1, big_k + 1);
  for (int l = 0; l <= big_k; ++l) {
    if (l < big_k) q(l, l + 1) += lambda;
    if (l > 0) q(l, l - 1) += l * mu;
  }
  // A deferral phase launched from (K, 0) ends in (l, 0); the l = K share
  // is a self loop and drops out of the generator.
  for (int l = 1; l < big_k; ++l) {
    q(big_k, l) += lambda * std::max(0.0, phase_end_probs[l - 1]);
  }
  q.diagonal() = -q.rowwise().sum();
  return GeneratorMatrix(std::move(q));
}

GeneratorMatrix build_esrt_generator(const ValidatedParams& p, double rearrival_rate,
                                     int max_deferrals) {
  if (max_deferrals < 1) throw InvalidParameter("max_deferrals", "must be at least 1");
  if (!(rearrival_rate > 0.0)) throw InvalidParameter("rearrival_rate", "must be positive");
  const int big_k = p.num_servers();
  const int big_d = max_deferrals;
  const double lambda = p.arrival_rate();
  const double mu = p.service_rate();
  const double alpha = rearrival_rate;
  const int dim = (big_k + 1) * (big_d + 1);

  Matrix q = Matrix::Zero(dim, dim);
  for (int d = 0; d <= big_d; ++d) {
    for (int k = 0; k <= big_k; ++k) {
      const int row = config_index(k, d, big_k, 0);
      if (k < big_k) q(row, config_index(k + 1, d, big_k, 0)) += lambda;
      if (k > 0) q(row, config_index(k - 1, d, big_k, 0)) += k * mu;
      if (k == big_k && d < big_d) q(row, config_index(big_k, d + 1, big_k, 0)) += lambda;
      if (d >= 1) {
        // A rearrival is admitted when a server is free, dropped otherwise.
        if (k < big_k) {
          q(row, config_index(k + 1, d - 1, big_k, 0)) += alpha;
        } else {
          q(row, config_index(big_k, d - 1, big_k, 0)) += alpha;
        }
      }
    }
  }
  q.diagonal() = -q.rowwise().sum();
  return GeneratorMatrix(std::move(q));
}

StochasticMatrix transition_matrix(const GeneratorMatrix& generator, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw InvalidParameter("t", "must be non-negative and finite");
  }
  Matrix e = (generator.entries() * t).exp();
  if (!e.allFinite()) throw ConvergenceFailure("matrix exponential diverged");
  return StochasticMatrix(std::move(e));
}

std::pair<Matrix, Matrix> transition_and_occupancy(const GeneratorMatrix& generator,
                                                   double horizon) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidParameter("horizon", "must be positive and finite");
  }
  const int n = generator.dim();
  // exp([[Q, I], [0, 0]] x) = [[e^{Qx}, int_0^x e^{Qt} dt], [0, I]].
  Matrix augmented = Matrix::Zero(2 * n, 2 * n);
  augmented.topLeftCorner(n, n) = generator.entries() * horizon;
  augmented.topRightCorner(n, n) = Matrix::Identity(n, n) * horizon;
  Matrix e = augmented.exp();
  if (!e.allFinite()) throw ConvergenceFailure("augmented matrix exponential diverged");
  return {e.topLeftCorner(n, n), e.topRightCorner(n, n)};
}

DistributionVector transient_distribution(const DistributionVector& init,
                                          const GeneratorMatrix& generator, double t) {
  if (init.dim() != generator.dim()) {
    throw InvalidParameter("init", "dimension mismatch with generator");
  }
  const StochasticMatrix e = transition_matrix(generator, t);
  Vector out = e.entries().transpose() * init.values();
  return DistributionVector(std::move(out));
}

OccupancyVector transient_occupancy(const DistributionVector& init,
                                    const GeneratorMatrix& generator, double horizon) {
  if (init.dim() != generator.dim()) {
    throw InvalidParameter("init", "dimension mismatch with generator");
  }
  auto [end, integral] = transition_and_occupancy(generator, horizon);
  (void)end;
  Vector out = integral.transpose() * init.values();
  return OccupancyVector(std::move(out), horizon);
}

DistributionVector dtmc_stationary(const StochasticMatrix& transition) {
  Matrix pattern = transition.entries();
  pattern.diagonal().setZero();
  if (!strongly_connected(pattern)) {
    throw NotIrreducible("transition matrix is not irreducible");
  }
  const int n = transition.dim();
  Matrix balance = transition.entries().transpose() - Matrix::Identity(n, n);
  Vector pi = stationary_solve(balance);
  const double residual =
      (transition.entries().transpose() * pi - pi).cwiseAbs().maxCoeff();
  if (residual > 1e-12) {
    throw SingularSystem("stationary residual above tolerance");
  }
  return DistributionVector(std::move(pi));
}

DistributionVector ctmc_stationary(const GeneratorMatrix& generator) {
  Matrix pattern = generator.entries();
  pattern.diagonal().setZero();
  if (!strongly_connected(pattern)) {
    throw NotIrreducible("generator is not irreducible");
  }
  Vector pi = stationary_solve(generator.entries().transpose());
  const double scale = std::max(1.0, generator.entries().cwiseAbs().maxCoeff());
  const double residual =
      (generator.entries().transpose() * pi).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * scale) {
    throw SingularSystem("stationary residual above tolerance");
  }
  return DistributionVector(std::move(pi));
}

}  // namespace deferq::ctmc
