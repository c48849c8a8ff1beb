#pragma once

#include <stdexcept>
#include <string>

namespace deferq {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A model parameter violates its domain (non-positive rate, K = 0, ...).
struct InvalidParameter : Error {
  InvalidParameter(const std::string& name, const std::string& reason)
      : Error("invalid parameter '" + name + "': " + reason), parameter(name) {}
  std::string parameter;
};

/// A probability vector is negative or does not sum to one.
struct InvalidDistribution : Error {
  using Error::Error;
};

/// A chain handed to a stationary solver is not irreducible.
struct NotIrreducible : Error {
  using Error::Error;
};

/// A linear system that should be solvable came out singular.
struct SingularSystem : Error {
  using Error::Error;
};

/// A matrix-geometric level came out with a clearly negative entry.
struct NegativeProbability : Error {
  using Error::Error;
};

/// Matrix exponential or iterative solve failed to reach tolerance.
struct ConvergenceFailure : Error {
  using Error::Error;
};

/// Simulation horizon is unusable (no post-warmup arrivals).
struct InvalidHorizon : Error {
  using Error::Error;
};

/// Optimizer bounds are empty or inverted.
struct EmptyBounds : Error {
  using Error::Error;
};

}  // namespace deferq
