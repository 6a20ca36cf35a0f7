#pragma once

#include <cstdint>
#include <random>

namespace penlab {

/// SplitMix64 step. Used to derive statistically independent sub-seeds from
/// a root seed (per path, per channel) so that runs are reproducible and
/// individual paths can be regenerated in isolation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic sub-seed for stream `index` of channel `channel` under
/// `root`. Distinct (channel, index) pairs give uncorrelated streams.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t channel,
                                 std::uint64_t index) {
    std::uint64_t s = root ^ (0x6a09e667f3bcc909ULL * (channel + 1));
    splitmix64(s);
    s ^= 0x3c6ef372fe94f82bULL * (index + 1);
    return splitmix64(s);
}

/// Engine seeded from a derived seed. mt19937_64 everywhere so a single
/// engine type appears in outputs and tests.
inline std::mt19937_64 make_engine(std::uint64_t root, std::uint64_t channel,
                                   std::uint64_t index) {
    return std::mt19937_64(derive_seed(root, channel, index));
}

} // namespace penlab
