#pragma once

// SplitMix64 generator plus the exact derived draws used by every stream and
// initializer, so runs can be reproduced bit-for-bit from their seeds.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <utility>

namespace kanol {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // 53 random bits scaled to [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform on {0, .., n-1} by modulo reduction (bias below 2^-40 for the
  // sizes used here).
  std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }

  // Box-Muller pair from u1 in (0, 1] and u2 in [0, 1).
  std::pair<double, double> gaussian_pair() noexcept {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Seed for a named purpose ("stream", "init", ...) derived from a run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (const char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return Rng::mix(base ^ Rng::mix(h));
}

}  // namespace kanol
