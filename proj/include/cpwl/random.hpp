// SPDX-License-Identifier: Apache-2.0
//
// Counter-based seed splitting so that every (seed, stream, index) triple
// gets an independent, reproducible generator regardless of thread layout.

#pragma once

#include <cstdint>
#include <random>

namespace cpwl {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-seed for stream `a`, index `b` of a root seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (a * 0xD1B54A32D192ED03ULL)) ^
                    (b * 0x8CB92BA72F3D8DD7ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(seed, a, b));
}

}  // namespace cpwl
