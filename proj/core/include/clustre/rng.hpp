#pragma once

#include <cstdint>
#include <random>

namespace clustre {

/// SplitMix64 finaliser; a bijective mix of the 64-bit input.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of path `index` in a batch rooted at `seed`. Streams depend only on
/// (seed, index), so batches are reproducible under any parallel schedule.
[[nodiscard]] constexpr std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

} // namespace clustre
