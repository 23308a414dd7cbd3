#pragma once

#include <cstdint>
#include <random>

namespace zoge {

using Rng = std::mt19937_64;

/// Independent stream for (seed, realization, branch). Any random quantity in
/// the library is a function of this triple only, so results do not depend on
/// scheduling or worker count.
inline Rng make_stream(std::uint64_t seed, std::uint64_t realization = 0, std::uint64_t branch = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(realization), static_cast<std::uint32_t>(realization >> 32),
                    static_cast<std::uint32_t>(branch), static_cast<std::uint32_t>(branch >> 32)};
  return Rng(seq);
}

/// Uniform double in [0, 1) built from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace zoge
