#pragma once

#include <cstdint>
#include <random>

namespace pelab {

// All randomness in the library flows through these helpers so that a seed
// fully determines every draw. std::mt19937_64 has a fixed output sequence
// by standard; the bounded/real mappings below are pinned here instead of
// relying on std::*_distribution, whose mappings are implementation-defined.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
// distribution exact for any range.
inline std::uint64_t uniform_u64(Rng& rng, std::uint64_t lo,
                                 std::uint64_t hi) {
  const std::uint64_t span = hi - lo + 1;
  if (span == 0) return rng();  // full range
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return lo + draw % span;
}

inline long uniform_int(Rng& rng, long lo, long hi) {
  return lo + static_cast<long>(uniform_u64(rng, 0,
                                            static_cast<std::uint64_t>(hi - lo)));
}

}  // namespace pelab
