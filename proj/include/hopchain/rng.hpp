#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hopchain {

// Deterministic sampling helpers. The mt19937_64 engine output is fixed by
// the standard; the std:: distributions are not, so we roll the few mappings
// we need to keep seeded runs byte-identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(u64() % span);
  }

  /// Index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(u64() % static_cast<std::uint64_t>(n));
  }

  /// Box-Muller normal; draws two uniforms per sample.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// Derives an independent stream keyed on (seed, salt); does not advance
  /// this generator, so the same salt always yields the same stream.
  Rng fork(std::uint64_t salt) const {
    std::uint64_t x = seed_ + (salt + 1) * 0x9e3779b97f4a7c15ull;
    // splitmix64 finalizer
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace hopchain
