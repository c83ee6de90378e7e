#pragma once

#include <cstdint>
#include <random>

namespace approxsense {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijective mixer on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based split: the seed of stream `counter` under `seed` depends only
// on the pair, never on the order in which streams are requested. Trials,
// Monte Carlo draws and operator noise all take their seeds from here.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
  return mix64(mix64(seed) ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

// Named sub-streams so that independent consumers of one top-level seed never
// collide.
enum class Stream : std::uint64_t {
  kLabelled = 1,
  kUnlabelled = 2,
  kTrueError = 3,
  kTrueSensitivity = 4,
  kOperatorNoise = 5,
  kRademacher = 6,
  kSearch = 7,
  kTrial = 8,
  kReference = 9,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream) noexcept {
  return derive_seed(seed, static_cast<std::uint64_t>(stream) << 48);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace approxsense
