#pragma once

#include <cstdint>
#include <random>

namespace mobcast {

// Uniform integer in [0, n) from a 64-bit engine. Unlike
// std::uniform_int_distribution the result sequence is identical across
// standard library implementations.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % n;
}

// Uniform real in [0, 1) with 53 bits of precision.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace mobcast
