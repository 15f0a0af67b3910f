#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace qmlsec {

// splitmix64 step; advances the state and returns the next 64-bit value.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed for stream element k of a base seed. Used wherever work is fanned out
// (trajectories, per-image generation) so parallel order cannot change results.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k) {
  std::uint64_t state = base + k * 0x9E3779B97F4A7C15ULL;
  return splitmix64(state);
}

// Uniform double in [0, 1) from the top 53 bits. Distributions from <random>
// are implementation-defined, so all sampling goes through these helpers.
inline double uniform_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

// Uniform integer in [lo, hi] via fixed-point multiply (no modulo bias path
// dependence across platforms).
inline std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t x = rng();
  return lo + static_cast<std::int64_t>(
                  (static_cast<unsigned __int128>(x) * span) >> 64);
}

// Box-Muller, one value per call (two uniforms consumed, no cached spare).
inline double normal_double(std::mt19937_64& rng) {
  double u1 = uniform_double(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform_double(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace qmlsec
