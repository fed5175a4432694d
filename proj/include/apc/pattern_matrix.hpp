#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apc/error.hpp"

namespace apc {

/// Dense row-major matrix of non-negative activation magnitudes.
/// A zero entry marks an inactive neuron; support(row) = { j : value > 0 }.
/// Immutable once constructed, so it is safe to read from many workers.
class PatternMatrix {
public:
    PatternMatrix(std::size_t n_rows, std::size_t n_cols,
                  std::vector<double> values)
        : n_rows_(n_rows), n_cols_(n_cols), values_(std::move(values)) {
        if (n_rows_ == 0 || n_cols_ == 0) {
            throw InvalidConfigError("PatternMatrix requires n_rows >= 1 and n_cols >= 1");
        }
        if (values_.size() != n_rows_ * n_cols_) {
            throw DimensionError("PatternMatrix value buffer does not match " +
                                 std::to_string(n_rows_) + "x" + std::to_string(n_cols_));
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const double v = values_[i];
            if (!std::isfinite(v)) {
                throw DomainError("non-finite value at row " + std::to_string(i / n_cols_) +
                                  ", col " + std::to_string(i % n_cols_));
            }
            if (v < 0.0) {
                throw DomainError("negative value at row " + std::to_string(i / n_cols_) +
                                  ", col " + std::to_string(i % n_cols_));
            }
        }
    }

    static PatternMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) {
            throw InvalidConfigError("PatternMatrix requires at least one row");
        }
        const std::size_t d = rows.front().size();
        std::vector<double> values;
        values.reserve(rows.size() * d);
        for (const auto& r : rows) {
            if (r.size() != d) {
                throw DimensionError("ragged rows in PatternMatrix::from_rows");
            }
            values.insert(values.end(), r.begin(), r.end());
        }
        return PatternMatrix(rows.size(), d, std::move(values));
    }

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }

    double at(std::size_t row, std::size_t col) const {
        if (row >= n_rows_ || col >= n_cols_) {
            throw IndexError("PatternMatrix index (" + std::to_string(row) + ", " +
                             std::to_string(col) + ") out of range");
        }
        return values_[row * n_cols_ + col];
    }

    std::span<const double> row(std::size_t r) const {
        if (r >= n_rows_) {
            throw IndexError("row " + std::to_string(r) + " out of range");
        }
        return {values_.data() + r * n_cols_, n_cols_};
    }

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t n_rows_;
    std::size_t n_cols_;
    std::vector<double> values_;
};

/// Row-major bit-packed activation states (1 = active), 64-bit words,
/// LSB-first within each word. Padding bits past n_cols stay zero.
class BinarySupportMatrix {
public:
    BinarySupportMatrix(std::size_t n_rows, std::size_t n_cols)
        : n_rows_(n_rows), n_cols_(n_cols),
          words_per_row_((n_cols + 63) / 64), bits_(n_rows * words_per_row_, 0) {
        if (n_rows_ == 0 || n_cols_ == 0) {
            throw InvalidConfigError("BinarySupportMatrix requires n_rows >= 1 and n_cols >= 1");
        }
    }

    /// Support view of a pattern matrix: bit set exactly where value > 0.
    static BinarySupportMatrix from_pattern(const PatternMatrix& m) {
        BinarySupportMatrix out(m.n_rows(), m.n_cols());
        const auto& v = m.values();
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            const std::size_t base = r * m.n_cols();
            for (std::size_t j = 0; j < m.n_cols(); ++j) {
                if (v[base + j] > 0.0) {
                    out.set_bit(r, j);
                }
            }
        }
        return out;
    }

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }
    std::size_t words_per_row() const noexcept { return words_per_row_; }

    bool get(std::size_t row, std::size_t col) const {
        if (row >= n_rows_ || col >= n_cols_) {
            throw IndexError("BinarySupportMatrix index (" + std::to_string(row) + ", " +
                             std::to_string(col) + ") out of range");
        }
        return (bits_[row * words_per_row_ + col / 64] >> (col % 64)) & 1u;
    }

    void set_bit(std::size_t row, std::size_t col) {
        if (row >= n_rows_ || col >= n_cols_) {
            throw IndexError("BinarySupportMatrix index (" + std::to_string(row) + ", " +
                             std::to_string(col) + ") out of range");
        }
        bits_[row * words_per_row_ + col / 64] |= std::uint64_t{1} << (col % 64);
    }

    std::span<const std::uint64_t> row_words(std::size_t r) const {
        if (r >= n_rows_) {
            throw IndexError("row " + std::to_string(r) + " out of range");
        }
        return {bits_.data() + r * words_per_row_, words_per_row_};
    }

    /// Writable view of one row's words. Bits past n_cols must stay zero.
    std::span<std::uint64_t> row_words_mut(std::size_t r) {
        if (r >= n_rows_) {
            throw IndexError("row " + std::to_string(r) + " out of range");
        }
        return {bits_.data() + r * words_per_row_, words_per_row_};
    }

    std::uint64_t row_popcount(std::size_t r) const {
        std::uint64_t n = 0;
        for (std::uint64_t w : row_words(r)) {
            n += static_cast<std::uint64_t>(std::popcount(w));
        }
        return n;
    }

    std::uint64_t total_popcount() const {
        std::uint64_t n = 0;
        for (std::uint64_t w : bits_) {
            n += static_cast<std::uint64_t>(std::popcount(w));
        }
        return n;
    }

    const std::vector<std::uint64_t>& words() const noexcept { return bits_; }

    friend bool operator==(const BinarySupportMatrix& a,
                           const BinarySupportMatrix& b) = default;

private:
    std::size_t n_rows_;
    std::size_t n_cols_;
    std::size_t words_per_row_;
    std::vector<std::uint64_t> bits_;
};

/// Zeroes the floor(target_sparsity * n_cols) smallest-magnitude entries of
/// each row and stores the surviving entries as magnitudes. Ties on |value|
/// zero the lower index first; exact zeros sort first, so they count toward
/// the sparsity budget.
///
/// The input may still carry signed values; the result is a valid
/// (non-negative) PatternMatrix.
inline PatternMatrix apply_magnitude_threshold(std::size_t n_rows, std::size_t n_cols,
                                               std::span<const double> raw_values,
                                               double target_sparsity) {
    if (!(target_sparsity >= 0.0) || target_sparsity >= 1.0) {
        throw InvalidConfigError("target_sparsity must lie in [0, 1)");
    }
    if (n_rows == 0 || n_cols == 0 || raw_values.size() != n_rows * n_cols) {
        throw DimensionError("raw value buffer does not match requested shape");
    }
    for (std::size_t i = 0; i < raw_values.size(); ++i) {
        if (!std::isfinite(raw_values[i])) {
            throw DomainError("non-finite value at row " + std::to_string(i / n_cols));
        }
    }

    const std::size_t zero_count =
        static_cast<std::size_t>(std::floor(target_sparsity * static_cast<double>(n_cols)));
    std::vector<double> out(n_rows * n_cols);
    std::vector<std::size_t> order(n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* in = raw_values.data() + r * n_cols;
        double* dst = out.data() + r * n_cols;
        for (std::size_t j = 0; j < n_cols; ++j) {
            dst[j] = std::fabs(in[j]);
        }
        if (zero_count > 0) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [dst](std::size_t a, std::size_t b) {
                if (dst[a] != dst[b]) {
                    return dst[a] < dst[b];
                }
                return a < b;
            });
            for (std::size_t i = 0; i < zero_count; ++i) {
                dst[order[i]] = 0.0;
            }
        }
    }
    return PatternMatrix(n_rows, n_cols, std::move(out));
}

inline PatternMatrix apply_magnitude_threshold(const PatternMatrix& m,
                                               double target_sparsity) {
    return apply_magnitude_threshold(m.n_rows(), m.n_cols(), m.values(), target_sparsity);
}

/// Indices { j : value(row, j) > 0 }, ascending.
inline std::vector<std::size_t> support_of(const PatternMatrix& m, std::size_t row) {
    const auto r = m.row(row); // throws IndexError when out of range
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < r.size(); ++j) {
        if (r[j] > 0.0) {
            support.push_back(j);
        }
    }
    return support;
}

} // namespace apc
