#pragma once

#include <cstdint>

namespace intrafair {

/// SplitMix64 finaliser.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for replicate `index` of a run with `master` seed:
///   splitmix64(master ^ splitmix64(index + 1)).
/// Depends only on (master, index), so adding replicates never reshuffles
/// earlier ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(master ^ splitmix64(index + 1));
}

/// Independent stream for a named sub-task of a seed (split, init, dropout...).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed + 0x632be59bd9b4e019ULL * (stream + 1));
}

}  // namespace intrafair
