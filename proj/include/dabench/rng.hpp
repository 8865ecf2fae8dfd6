#pragma once

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <numbers>
#include <vector>

namespace dabench {

// Counter-based random streams: every draw is a pure function of (key, counter),
// so a value can be regenerated by any rank without shared state. The generator
// is the SplitMix64 output function applied to the state key + counter * gamma.

inline constexpr std::uint64_t kRngGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t counter_mix(std::uint64_t key, std::uint64_t ctr) {
  std::uint64_t z = key + ctr * kRngGamma + kRngGamma;
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/// Uniform double in the open interval (0, 1).
inline double counter_uniform(std::uint64_t key, std::uint64_t ctr) {
  return (static_cast<double>(counter_mix(key, ctr) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via the Box-Muller cosine branch; consumes counters ctr and ctr+1.
inline double counter_normal(std::uint64_t key, std::uint64_t ctr) {
  const double u1 = counter_uniform(key, ctr);
  const double u2 = counter_uniform(key, ctr + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// k distinct indices in [0, n), drawn by rejection from the counter stream.
/// Order of draws is part of the frozen scheme.
inline std::vector<std::size_t> draw_distinct_indices(std::uint64_t key, std::size_t k,
                                                      std::size_t n) {
  std::vector<std::size_t> out;
  out.reserve(k);
  std::uint64_t ctr = 0;
  while (out.size() < k) {
    const auto idx = static_cast<std::size_t>(counter_uniform(key, ctr++) * static_cast<double>(n));
    const auto clamped = idx >= n ? n - 1 : idx;
    bool seen = false;
    for (auto v : out) seen = seen || (v == clamped);
    if (!seen) out.push_back(clamped);
  }
  return out;
}

}  // namespace dabench
