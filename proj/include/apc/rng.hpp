#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

namespace apc {

inline std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic 64-bit generator (splitmix64). Used everywhere a seeded
// stream is required, so results never depend on the platform's <random>
// distribution implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Unbiased draw from [0, bound) via mask rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound <= 1) {
            return 0;
        }
        const int bits = 64 - std::countl_zero(bound - 1);
        const std::uint64_t mask =
            (bits >= 64) ? ~0ull : ((std::uint64_t{1} << bits) - 1);
        for (;;) {
            const std::uint64_t v = next() & mask;
            if (v < bound) {
                return v;
            }
        }
    }

    // [0, 1) with 53 random bits.
    double real01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Independent stream for (seed, stream, substream), e.g. one per generated row.
// Work scheduled in parallel draws from these, so outputs do not depend on
// thread count.
inline SplitMix64 derive_stream(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t substream = 0) {
    std::uint64_t s = mix64(seed + 0x9e3779b97f4a7c15ull);
    s = mix64(s ^ (stream + 0xbf58476d1ce4e5b9ull));
    s = mix64(s ^ (substream + 0x94d049bb133111ebull));
    return SplitMix64(s);
}

// First k entries of a seeded partial Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                           std::size_t k,
                                                           SplitMix64& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

} // namespace apc
