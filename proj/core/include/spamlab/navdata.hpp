#pragma once

// Stand-in navigation data: a hashed bit per (seed, svid, band, symbol index)
// at the common symbol rate. No framing; symbol index k covers satellite
// time [k / 250, (k + 1) / 250).

#include <cstdint>

#include "spamlab/rng.hpp"
#include "spamlab/types.hpp"

namespace spamlab {

inline std::int8_t nav_symbol(std::uint64_t seed, int svid, Band band, long long index) {
  const auto h = derive_seed({seed, static_cast<std::uint64_t>(svid), static_cast<std::uint64_t>(band),
                              static_cast<std::uint64_t>(index)});
  return (h >> 17) & 1u ? std::int8_t{-1} : std::int8_t{1};
}

}  // namespace spamlab
