#pragma once

#include <cstdint>
#include <random>

namespace ftnoc {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ull));
}

template <typename... Rest>
constexpr std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return hash_mix(hash_mix(a, b), static_cast<std::uint64_t>(rest)...);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

/// Selftest hook: when armed, the n-th draw (counted across all Rng
/// instances of the thread) is XORed with a constant.
struct RngPerturbation {
  static void arm(std::int64_t draw_index);
  static void disarm();
};

/// Seeded generator with portable bounded draws (std distributions are
/// implementation-defined across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : eng_(splitmix64(seed)) {}

  std::uint64_t next();
  /// Uniform in [0, n), n > 0. Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n);
  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }
  double uniform() { return to_unit(next()); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ftnoc
