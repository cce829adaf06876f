#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>

namespace gdmstack {

/// Seeded pseudo-random source shared by every stochastic component.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// derives uniform and normal variates itself, so streams are reproducible
/// across standard library implementations. The std distributions are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform on [lo, hi]; returns lo when lo == hi.
  double uniform(double lo, double hi);
  /// Standard normal via the Box-Muller transform.
  double normal();
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

  /// Independent child stream; the parent state is not advanced.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// SplitMix64 finalizer, used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t value);

}  // namespace gdmstack
