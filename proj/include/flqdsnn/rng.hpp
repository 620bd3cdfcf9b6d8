#pragma once

#include <cstdint>
#include <initializer_list>

namespace flqdsnn {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent stream seed for a (base, tag...) path, e.g. (seed, round, client).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(base);
    for (auto p : path) {
        h = mix64(h ^ mix64(p));
    }
    return h;
}

// Stream tags.
inline constexpr std::uint64_t kStreamSplit = 1;
inline constexpr std::uint64_t kStreamPartition = 2;
inline constexpr std::uint64_t kStreamInit = 3;
inline constexpr std::uint64_t kStreamClient = 4;

} // namespace flqdsnn
