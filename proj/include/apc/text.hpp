#pragma once

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <system_error>

#include "apc/error.hpp"

namespace apc {

/// Shortest decimal form that parses back to the same double. Locale-free.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        throw Error("failed to format double");
    }
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& text, const std::string& what) {
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || errno == ERANGE) {
        throw DomainError("cannot parse " + what + " from '" + text + "'");
    }
    return v;
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DomainError("cannot parse " + what + " from '" + text + "'");
    }
    return v;
}

} // namespace apc
