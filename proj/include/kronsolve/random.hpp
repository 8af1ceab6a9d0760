#pragma once

#include <cstdint>
#include <random>

namespace kronsolve {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `stream` under parent seed `seed`. Distinct streams give
/// statistically independent generators.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL));
}

/// Explicitly seeded generator. There is no global random state anywhere in the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_of_engine(), stream)); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_of_engine() const {
    auto copy = engine_;
    return copy();
  }

  std::mt19937_64 engine_;
};

}  // namespace kronsolve
