#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace itrbal {

/// splitmix64 finalizer; used to derive well-separated seeds from
/// (master seed, stream tag, index) counters.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation for independent sub-streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return mix64(mix64(master) ^ mix64(stream * 0x9e3779b97f4a7c15ULL + 1)) ^
         mix64(index + 0x632be59bd9b4e019ULL);
}

/// Deterministic RNG with platform-independent uniform/normal draws.
/// Distributions are implemented on top of raw 64-bit output so that a
/// given seed produces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  static Rng derive(std::uint64_t master, std::uint64_t stream,
                    std::uint64_t index = 0) {
    return Rng(derive_seed(master, stream, index));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Box-Muller; consumes exactly two raw draws per call.
  double normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586477 * u2);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // rejection to avoid modulo bias
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// k distinct indices from {0, ..., n-1}, returned sorted ascending.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("sample: k out of range");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 gen_;
};

/// Stream tags for seed derivation; keeps draws for different purposes
/// independent so that e.g. the assignment mechanism never perturbs the
/// covariate stream.
namespace stream {
inline constexpr std::uint64_t covariates = 1;
inline constexpr std::uint64_t population = 2;
inline constexpr std::uint64_t treatment = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t subsample = 5;
inline constexpr std::uint64_t test_sample = 6;
inline constexpr std::uint64_t replication = 7;
}  // namespace stream

}  // namespace itrbal
