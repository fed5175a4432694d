#pragma once

#include <bit>
#include <cstdint>
#include <span>

namespace apc {

inline std::uint64_t popcount_and(std::span<const std::uint64_t> a,
                                  std::span<const std::uint64_t> b) {
    std::uint64_t n = 0;
    for (std::size_t w = 0; w < a.size(); ++w) {
        n += static_cast<std::uint64_t>(std::popcount(a[w] & b[w]));
    }
    return n;
}

inline std::uint64_t popcount_xor(std::span<const std::uint64_t> a,
                                  std::span<const std::uint64_t> b) {
    std::uint64_t n = 0;
    for (std::size_t w = 0; w < a.size(); ++w) {
        n += static_cast<std::uint64_t>(std::popcount(a[w] ^ b[w]));
    }
    return n;
}

} // namespace apc
