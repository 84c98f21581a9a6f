#pragma once

#include <cstdint>
#include <random>

namespace mixlab {

/// SplitMix64 finaliser.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based stream split: the seed of stream `k` under `master` is
/// splitmix64(master ^ splitmix64(k + 1)). Streams are independent of the
/// order in which they are consumed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(master ^ splitmix64(stream + 1));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

} // namespace mixlab
