#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apc {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid algorithm, generator, or model configuration (k > N, bad fractions, ...).
class InvalidConfigError : public Error {
public:
    using Error::Error;
};

// Shape mismatch between matrices, codebooks, or assignments.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Row/column/cluster index out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

// Value outside its documented domain (negative activation, non-finite input).
class DomainError : public Error {
public:
    using Error::Error;
};

// A metric whose denominator is empty (e.g. no active neurons anywhere).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// capacity * k < N: the balanced assignment cannot place every row.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Arithmetic left the representable range.
class OverflowError : public Error {
public:
    using Error::Error;
};

// Malformed APCB/APCF/APCC file; carries the offending byte offset.
class FormatError : public Error {
public:
    FormatError(const std::string& msg, std::size_t byte_offset)
        : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

} // namespace apc
