#pragma once

// Seeded random streams.
//
// All randomness flows through RandomStream, a std::mt19937_64 whose output
// sequence is fixed by the C++ standard. Uniform doubles are formed from the
// top 53 bits of each draw instead of std::uniform_real_distribution, whose
// algorithm is implementation-defined. Together these make every trajectory
// reproducible across compilers and platforms.
//
// Independent substreams are keyed by (master seed, index) through the
// SplitMix64 finalizer.

#include <cstdint>
#include <random>

namespace pglab {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for substream `index` of `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static RandomStream substream(std::uint64_t master, std::uint64_t index) {
    return RandomStream(derive_seed(master, index));
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace pglab
