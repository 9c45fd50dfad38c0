#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace satnet {

// SplitMix64 finalizer; used to derive independent, order-free substreams.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Engine for substream `stream` of a run seeded with `seed`. Any timestep can
// be reproduced on its own, so evaluation order does not matter.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64{derive_seed(seed, stream)};
}

// 64-bit FNV-1a; content hashes for manifests and the sweep cache.
inline constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace satnet
