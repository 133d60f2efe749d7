#pragma once

// Portable draws from std::mt19937_64. The engine's output sequence is fixed
// by the standard; the <random> distributions are not, so they are avoided
// wherever results must be reproducible across platforms.

#include <cstdint>
#include <limits>
#include <random>

namespace mdmtl::detail {

/// Uniform integer in [0, n) by rejection on raw 64-bit output.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace mdmtl::detail
