#pragma once

#include <Eigen/Dense>
#include <utility>

#include "deferq/errors.hpp"
#include "deferq/model.hpp"

namespace deferq::ctmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A (busy servers, deferred jobs) configuration.
struct Config {
  int busy = 0;
  int deferred = 0;
  friend bool operator==(const Config&, const Config&) = default;
};

/// Row-major index of configuration (k, d) when levels run d = d_min, d_min+1, ...
/// and each level holds k = 0..K: (d - d_min) * (K + 1) + k.
int config_index(int busy, int deferred, int num_servers, int deferred_min);

/// Inverse of config_index.
Config config_at(int index, int num_servers, int deferred_min);

/// Dense CTMC rate matrix. Off-diagonal entries are non-negative and every
/// row sums to zero (checked on construction).
class GeneratorMatrix {
 public:
  explicit GeneratorMatrix(Matrix rates);

  int dim() const { return static_cast<int>(rates_.rows()); }
  const Matrix& entries() const { return rates_; }
  double operator()(int from, int to) const { return rates_(from, to); }

 private:
  Matrix rates_;
};

/// Dense DTMC transition matrix. Entries lie in [0, 1] and every row sums
/// to one (checked on construction).
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Matrix probabilities);

  int dim() const { return static_cast<int>(probs_.rows()); }
  const Matrix& entries() const { return probs_; }
  double operator()(int from, int to) const { return probs_(from, to); }

 private:
  Matrix probs_;
};

/// Probability vector over configuration indices; non-negative, sums to one.
class DistributionVector {
 public:
  explicit DistributionVector(Vector probabilities);

  int dim() const { return static_cast<int>(probs_.size()); }
  const Vector& values() const { return probs_; }
  double operator[](int i) const { return probs_[i]; }

  /// Point mass on one index.
  static DistributionVector unit(int dim, int index);

 private:
  Vector probs_;
};

/// Expected time spent per configuration over a horizon [0, x]; entries are
/// non-negative and sum to the horizon.
class OccupancyVector {
 public:
  OccupancyVector(Vector times, double horizon);

  int dim() const { return static_cast<int>(times_.size()); }
  double horizon() const { return horizon_; }
  const Vector& values() const { return times_; }
  double operator[](int i) const { return times_[i]; }

 private:
  Vector times_;
  double horizon_;
};

/// Generator of the within-stage chain for the deterministic-spacing policy:
/// configurations (k, d) with k in [0, K] and d in [1, D]. Each level is a
/// birth-death chain at rates lambda and k*mu; the only level change is
/// (K, d) -> (K, d+1) at rate lambda for d < D. The deferred count never
/// decreases inside a stage.
GeneratorMatrix build_stage_generator(const ValidatedParams& p, int max_deferrals);

/// Generator of the system watched only while no jobs are deferred:
/// states (l, 0), l in [0, K]. Birth-death at lambda and l*mu, plus arcs
/// (K, 0) -> (l, 0) at rate lambda * phase_end_probs[l-1] for l < K; the
/// K-th share is a self loop and vanishes. phase_end_probs must be a
/// probability vector of length K.
GeneratorMatrix build_nondeferral_generator(const ValidatedParams& p,
                                            const Vector& phase_end_probs);

/// Generator of the exponential-spacing policy chain over (k, d) with
/// k in [0, K], d in [0, D]: birth-death in k at lambda and k*mu;
/// (K, d) -> (K, d+1) at lambda for d < D; rearrivals at rate alpha take
/// (k, d) -> (k+1, d-1) for k < K and (K, d) -> (K, d-1).
GeneratorMatrix build_esrt_generator(const ValidatedParams& p, double rearrival_rate,
                                     int max_deferrals);

/// e^{Qt}, rows validated as probability distributions.
StochasticMatrix transition_matrix(const GeneratorMatrix& generator, double t);

/// (e^{Qx}, integral_0^x e^{Qt} dt), both from one exponential of the
/// augmented block matrix [[Q, I], [0, 0]] * x.
std::pair<Matrix, Matrix> transition_and_occupancy(const GeneratorMatrix& generator,
                                                   double horizon);

/// init * e^{Qt}.
DistributionVector transient_distribution(const DistributionVector& init,
                                          const GeneratorMatrix& generator, double t);

/// init * integral_0^x e^{Qt} dt.
OccupancyVector transient_occupancy(const DistributionVector& init,
                                    const GeneratorMatrix& generator, double horizon);

/// Stationary distribution pi with pi P = pi. Requires irreducibility
/// (checked by reachability); residual below 1e-12.
DistributionVector dtmc_stationary(const StochasticMatrix& transition);

/// Stationary distribution pi with pi Q = 0. Requires irreducibility;
/// residual below 1e-10.
DistributionVector ctmc_stationary(const GeneratorMatrix& generator);

}  // namespace deferq::ctmc
