#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"

namespace memsa {

struct RngSeed {
  std::uint64_t value = 0;

  friend bool operator==(RngSeed, RngSeed) = default;
};

/// splitmix64 finalizer; maps (seed, stream) to a decorrelated child seed.
constexpr RngSeed derive_seed(RngSeed parent, std::uint64_t stream) noexcept {
  std::uint64_t z = parent.value + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return RngSeed{z ^ (z >> 31)};
}

/// Seeded generator. Streams are reproducible for a given build.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Matrix init_normal(std::size_t rows, std::size_t cols, RngSeed seed, double mean = 0.0,
                          double stddev = 0.05) {
  if (!(stddev > 0.0)) throw InvalidArgument("init_normal: std must be positive");
  Rng rng(seed);
  Matrix out(rows, cols);
  for (auto& v : out.data()) v = rng.normal(mean, stddev);
  return out;
}

inline Matrix init_normal(std::size_t rows, std::size_t cols, Rng& rng, double mean = 0.0,
                          double stddev = 0.05) {
  if (!(stddev > 0.0)) throw InvalidArgument("init_normal: std must be positive");
  Matrix out(rows, cols);
  for (auto& v : out.data()) v = rng.normal(mean, stddev);
  return out;
}

}  // namespace memsa
