#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace deferq {

/// One SplitMix64 step; used to whiten seeds and derive per-replication
/// streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed of replication stream r under a base seed:
/// splitmix64(base_seed + (r + 1) * golden), one step. Streams for distinct
/// replications are decorrelated and each is reproducible on its own.
inline std::uint64_t replication_seed(std::uint64_t base_seed, std::uint64_t replication) {
  std::uint64_t s = base_seed + (replication + 1) * 0x9E3779B97F4A7C15ull;
  return splitmix64(s);
}

/// Simulation RNG. mt19937_64 supplies the raw 64-bit words; uniforms and
/// exponentials are derived by inverse transform on (word >> 11) * 2^-53 so
/// the draw sequence is bit-identical across platforms and standard
/// libraries (std::exponential_distribution makes no such promise).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Exponential with the given rate; inverse transform, safe at u = 0.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace deferq
