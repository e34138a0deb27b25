#pragma once

#include <cstdint>
#include <random>

namespace cgame {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent sub-seed for (seed, stream, index); streams separate unrelated uses of one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

namespace streams {
inline constexpr std::uint64_t kDemand = 0x64656d616e64ULL;
inline constexpr std::uint64_t kTravel = 0x74726176656cULL;
inline constexpr std::uint64_t kItem = 0x6974656dULL;
inline constexpr std::uint64_t kSplit = 0x73706c6974ULL;
inline constexpr std::uint64_t kVolume = 0x766f6cULL;
inline constexpr std::uint64_t kInit = 0x696e6974ULL;
inline constexpr std::uint64_t kBatch = 0x6261746368ULL;
inline constexpr std::uint64_t kMatcher = 0x6d61746368ULL;
} // namespace streams

} // namespace cgame
