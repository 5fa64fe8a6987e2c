#pragma once

#include <cmath>
#include <cstdint>

namespace deihdl {

// splitmix64 stream. The standard <random> distributions are avoided on
// purpose: their output sequences are implementation-defined, which would
// break the byte-identical-output contract of seeded runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer on [0, n). Multiply-shift; the bias is far below
  /// anything observable at the population sizes used here.
  std::size_t next_below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal (Box-Muller). Always consumes exactly two draws.
  double gaussian() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent stream from a master seed and up to three tags.
/// Every (generation, individual) pair and every synthetic (model, image,
/// channel) triple gets its own stream, so results never depend on
/// evaluation order or worker count.
inline Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) {
  std::uint64_t s = mix64(seed + 0x9E3779B97F4A7C15ull);
  s = mix64(s ^ (a + 0xBF58476D1CE4E5B9ull));
  s = mix64(s ^ (b + 0x94D049BB133111EBull));
  s = mix64(s ^ (c + 0xD6E8FEB86659FD93ull));
  return Rng(s);
}

}  // namespace deihdl
