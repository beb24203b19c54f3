#pragma once

#include <cstdint>

namespace repshift {

/// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a tag, e.g. the
/// task index. Depends only on its two arguments so resumed runs see the same
/// per-task seeds.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t tag) {
    return splitmix64(splitmix64(master) ^ (tag * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

// Tags for the non-task streams of one run.
inline constexpr std::uint64_t kStreamTag = 0x5354524541ULL;
inline constexpr std::uint64_t kInitTag = 0x494e4954ULL;
inline constexpr std::uint64_t kProbeTag = 0x50524f4245ULL;

}  // namespace repshift
