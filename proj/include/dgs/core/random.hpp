#pragma once

#include <cstdint>
#include <random>

namespace dgs {

/// Independent deterministic stream `stream` of the run seeded by `seed`.
inline std::mt19937_64 make_rng(uint64_t seed, uint32_t stream) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

} // namespace dgs
