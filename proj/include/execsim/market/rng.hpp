#pragma once

#include <cstdint>
#include <random>

namespace execsim {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (master seed, stream id, sub-stream).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t sub = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) + sub);
}

// Counter-based uniform in [0, 1): depends only on (seed, counter).
constexpr double hash_uniform(std::uint64_t seed, std::uint64_t counter) noexcept {
  return static_cast<double>(derive_seed(seed, counter) >> 11) * 0x1.0p-53;
}

}  // namespace execsim
