#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>

namespace echoreason {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// FNV-1a, used for stable string keys and content fingerprints.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

std::string hex64(std::uint64_t value);

// Seed of an independent substream keyed by (master, keys...). Order of keys
// matters; the same tuple always yields the same seed.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) noexcept;

// Seeded generator with platform-independent output. The engine is
// std::mt19937_64, whose sequence is fixed by the standard; all transforms
// below are defined here rather than via <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace echoreason
