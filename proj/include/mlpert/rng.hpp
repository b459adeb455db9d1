#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mlpert {

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// Combines a base seed with an epoch/label into a new base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);

/// Deterministic generator for one (seed, stream) pair. Streams are
/// independent substreams of the same seed; the perturbation code uses the
/// tuple index as stream id so results do not depend on processing order.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via the Marsaglia polar method.
  double normal();
  void fill_normal(std::span<double> out);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mlpert
