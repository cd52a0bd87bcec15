#pragma once

#include <cstdint>
#include <random>

namespace cntnet {

/// SplitMix64 finaliser; mixes (seed, stream) into an independent engine seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

using Engine = std::mt19937_64;

/// Engine for work item `stream` under `seed`. Results do not depend on
/// which thread, or in which order, the streams are consumed.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) { return Engine(mix_seed(seed, stream)); }

}  // namespace cntnet
