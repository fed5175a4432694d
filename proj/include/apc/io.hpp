#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "apc/clustering_types.hpp"
#include "apc/error.hpp"
#include "apc/pattern_matrix.hpp"
#include "apc/text.hpp"

namespace apc {

namespace detail {

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint64_t offset() const noexcept { return offset_; }

    void read_exact(unsigned char* dst, std::size_t n) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("unexpected end of file", offset_);
        }
        offset_ += n;
    }

    std::uint16_t u16() {
        unsigned char b[2];
        read_exact(b, 2);
        return static_cast<std::uint16_t>(b[0] | (std::uint16_t{b[1]} << 8));
    }

    std::uint64_t u64() {
        unsigned char b[8];
        read_exact(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | b[i];
        }
        return v;
    }

    float f32() {
        unsigned char b[4];
        read_exact(b, 4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | b[i];
        }
        return std::bit_cast<float>(v);
    }

    double f64() {
        unsigned char b[8];
        read_exact(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | b[i];
        }
        return std::bit_cast<double>(v);
    }

    void expect_magic(const char (&magic)[5]) {
        unsigned char b[4];
        read_exact(b, 4);
        for (int i = 0; i < 4; ++i) {
            if (b[i] != static_cast<unsigned char>(magic[i])) {
                throw FormatError(std::string("bad magic, expected '") + magic + "'", 0);
            }
        }
    }

    void expect_eof() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw FormatError("trailing data after declared payload", offset_);
        }
    }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void bytes(const unsigned char* src, std::size_t n) {
        out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
    }

    void u16(std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>(v >> 8)};
        bytes(b, 2);
    }

    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) {
            b[i] = static_cast<unsigned char>(v >> (8 * i));
        }
        bytes(b, 8);
    }

    void f32(float v) {
        const auto u = std::bit_cast<std::uint32_t>(v);
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) {
            b[i] = static_cast<unsigned char>(u >> (8 * i));
        }
        bytes(b, 4);
    }

    void f64(double v) {
        const auto u = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) {
            b[i] = static_cast<unsigned char>(u >> (8 * i));
        }
        bytes(b, 8);
    }

    void magic(const char (&m)[5]) {
        bytes(reinterpret_cast<const unsigned char*>(m), 4);
    }

private:
    std::ostream& out_;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path + "' for reading");
    }
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    return out;
}

inline void check_write(std::ostream& out, const std::string& what) {
    if (!out) {
        throw Error("write failed while emitting " + what);
    }
}

} // namespace detail

inline constexpr std::uint16_t kFormatVersion = 1;

/// Bit matrix container: magic "APCB", u16 version, u64 n_rows, u64 n_cols,
/// then per row ceil(n_cols / 8) bytes, LSB-first; padding bits are zero.
inline void write_binary_matrix(const BinarySupportMatrix& m, std::ostream& out) {
    detail::BinaryWriter w(out);
    w.magic("APCB");
    w.u16(kFormatVersion);
    w.u64(m.n_rows());
    w.u64(m.n_cols());
    const std::size_t row_bytes = (m.n_cols() + 7) / 8;
    std::vector<unsigned char> buf(row_bytes);
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        const auto words = m.row_words(r);
        for (std::size_t b = 0; b < row_bytes; ++b) {
            buf[b] = static_cast<unsigned char>(words[b / 8] >> (8 * (b % 8)));
        }
        w.bytes(buf.data(), row_bytes);
    }
    detail::check_write(out, "bit matrix");
}

inline BinarySupportMatrix read_binary_matrix(std::istream& in) {
    detail::BinaryReader r(in);
    r.expect_magic("APCB");
    const std::uint16_t version = r.u16();
    if (version != kFormatVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4);
    }
    const std::uint64_t n_rows = r.u64();
    const std::uint64_t n_cols = r.u64();
    if (n_rows == 0) {
        throw FormatError("declared n_rows is zero", 6);
    }
    if (n_cols == 0) {
        throw FormatError("declared n_cols is zero", 14);
    }
    BinarySupportMatrix m(n_rows, n_cols);
    const std::size_t row_bytes = (n_cols + 7) / 8;
    const unsigned tail_bits = static_cast<unsigned>(n_cols % 8);
    std::vector<unsigned char> buf(row_bytes);
    for (std::uint64_t row = 0; row < n_rows; ++row) {
        const std::uint64_t row_offset = r.offset();
        r.read_exact(buf.data(), row_bytes);
        if (tail_bits != 0 &&
            (buf[row_bytes - 1] & static_cast<unsigned char>(0xFF << tail_bits)) != 0) {
            throw FormatError("nonzero padding bits in row " + std::to_string(row),
                              row_offset + row_bytes - 1);
        }
        auto words = m.row_words_mut(row);
        for (std::size_t b = 0; b < row_bytes; ++b) {
            words[b / 8] |= std::uint64_t{buf[b]} << (8 * (b % 8));
        }
    }
    r.expect_eof();
    return m;
}

/// Real matrix container: magic "APCF", u16 version, u64 n_rows, u64 n_cols,
/// then row-major 32-bit little-endian floats. Values must be finite and
/// non-negative.
inline void write_real_matrix(const PatternMatrix& m, std::ostream& out) {
    detail::BinaryWriter w(out);
    w.magic("APCF");
    w.u16(kFormatVersion);
    w.u64(m.n_rows());
    w.u64(m.n_cols());
    const auto& values = m.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto f = static_cast<float>(values[i]);
        if (!std::isfinite(f)) {
            throw DomainError("value at row " + std::to_string(i / m.n_cols()) + ", col " +
                              std::to_string(i % m.n_cols()) +
                              " does not fit 32-bit storage");
        }
        w.f32(f);
    }
    detail::check_write(out, "real matrix");
}

inline PatternMatrix read_real_matrix(std::istream& in) {
    detail::BinaryReader r(in);
    r.expect_magic("APCF");
    const std::uint16_t version = r.u16();
    if (version != kFormatVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4);
    }
    const std::uint64_t n_rows = r.u64();
    const std::uint64_t n_cols = r.u64();
    if (n_rows == 0) {
        throw FormatError("declared n_rows is zero", 6);
    }
    if (n_cols == 0) {
        throw FormatError("declared n_cols is zero", 14);
    }
    std::vector<double> values;
    values.reserve(n_rows * n_cols);
    for (std::uint64_t row = 0; row < n_rows; ++row) {
        for (std::uint64_t col = 0; col < n_cols; ++col) {
            const float f = r.f32();
            if (!std::isfinite(f)) {
                throw DomainError("non-finite value at row " + std::to_string(row) +
                                  ", col " + std::to_string(col));
            }
            if (f < 0.0f) {
                throw DomainError("negative value at row " + std::to_string(row) +
                                  ", col " + std::to_string(col));
            }
            values.push_back(static_cast<double>(f));
        }
    }
    r.expect_eof();
    return PatternMatrix(n_rows, n_cols, std::move(values));
}

/// Codebook container: magic "APCC", u16 version, u64 k, u64 dim,
/// f64 density_p, then per centroid u64 count, `count` ascending u64 feature
/// indices, `count` positive 32-bit floats.
inline void write_codebook(const CentroidSet& cs, std::ostream& out) {
    cs.validate();
    detail::BinaryWriter w(out);
    w.magic("APCC");
    w.u16(kFormatVersion);
    w.u64(cs.k());
    w.u64(cs.dim);
    w.f64(cs.density_p);
    for (std::size_t c = 0; c < cs.k(); ++c) {
        const Centroid& cen = cs.centroids[c];
        w.u64(cen.active_set.size());
        for (std::size_t j : cen.active_set) {
            w.u64(j);
        }
        for (std::size_t i = 0; i < cen.intensities.size(); ++i) {
            const auto f = static_cast<float>(cen.intensities[i]);
            if (!(std::isfinite(f) && f > 0.0f)) {
                throw DomainError("centroid " + std::to_string(c) + " intensity " +
                                  std::to_string(i) + " does not fit 32-bit storage");
            }
            w.f32(f);
        }
    }
    detail::check_write(out, "codebook");
}

inline CentroidSet read_codebook(std::istream& in) {
    detail::BinaryReader r(in);
    r.expect_magic("APCC");
    const std::uint16_t version = r.u16();
    if (version != kFormatVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4);
    }
    const std::uint64_t k = r.u64();
    const std::uint64_t dim = r.u64();
    const std::uint64_t density_offset = r.offset();
    const double density_p = r.f64();
    if (k == 0) {
        throw FormatError("declared k is zero", 6);
    }
    if (dim == 0) {
        throw FormatError("declared dim is zero", 14);
    }
    if (!(std::isfinite(density_p) && density_p >= 0.0 && density_p <= 1.0)) {
        throw FormatError("density_p outside [0, 1]", density_offset);
    }
    CentroidSet cs;
    cs.dim = dim;
    cs.density_p = density_p;
    cs.centroids.resize(k);
    for (std::uint64_t c = 0; c < k; ++c) {
        const std::uint64_t count_offset = r.offset();
        const std::uint64_t count = r.u64();
        if (count > dim) {
            throw FormatError("centroid " + std::to_string(c) + " count " +
                              std::to_string(count) + " exceeds dim", count_offset);
        }
        Centroid& cen = cs.centroids[c];
        cen.density_p = density_p;
        cen.active_set.resize(count);
        cen.intensities.resize(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::uint64_t idx_offset = r.offset();
            const std::uint64_t idx = r.u64();
            if (idx >= dim) {
                throw FormatError("centroid " + std::to_string(c) + " index " +
                                  std::to_string(idx) + " exceeds dim", idx_offset);
            }
            if (i > 0 && idx <= cen.active_set[i - 1]) {
                throw FormatError("centroid " + std::to_string(c) +
                                  " indices are not strictly ascending", idx_offset);
            }
            cen.active_set[i] = idx;
        }
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::uint64_t val_offset = r.offset();
            const float f = r.f32();
            if (!(std::isfinite(f) && f > 0.0f)) {
                throw FormatError("centroid " + std::to_string(c) +
                                  " intensity must be finite and > 0", val_offset);
            }
            cen.intensities[i] = static_cast<double>(f);
        }
    }
    r.expect_eof();
    cs.validate();
    return cs;
}

/// Plain-text fixture format: one row per line, whitespace-separated values;
/// blank lines and lines starting with '#' are skipped.
inline std::vector<std::vector<double>> read_text_rows(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::istringstream ls(line);
        std::vector<double> row;
        std::string token;
        while (ls >> token) {
            row.push_back(parse_double(token, "line " + std::to_string(line_no)));
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DimensionError("line " + std::to_string(line_no) + " has " +
                                 std::to_string(row.size()) + " values, expected " +
                                 std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline PatternMatrix read_text_matrix(std::istream& in) {
    return PatternMatrix::from_rows(read_text_rows(in));
}

inline void write_text_matrix(const PatternMatrix& m, std::ostream& out) {
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j != 0) {
                out << ' ';
            }
            out << format_double(row[j]);
        }
        out << '\n';
    }
    detail::check_write(out, "text matrix");
}

struct DatasetManifest {
    std::string sublayer_label = "synthetic"; // gate | up | down | synthetic
    std::size_t dim = 0;
    std::size_t n_rows = 0;
    std::string source;
    int format_version = 1;

    void validate() const {
        if (sublayer_label != "gate" && sublayer_label != "up" &&
            sublayer_label != "down" && sublayer_label != "synthetic") {
            throw InvalidConfigError("unknown sublayer_label '" + sublayer_label + "'");
        }
        if ((sublayer_label == "gate" || sublayer_label == "up") && dim != 14336) {
            throw InvalidConfigError(sublayer_label + " dumps have dim 14336, got " +
                                     std::to_string(dim));
        }
        if (sublayer_label == "down" && dim != 4096) {
            throw InvalidConfigError("down dumps have dim 4096, got " +
                                     std::to_string(dim));
        }
        if (dim == 0 || n_rows == 0) {
            throw InvalidConfigError("manifest dim and n_rows must be positive");
        }
    }
};

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["sublayer_label"] = m.sublayer_label;
    j["dim"] = m.dim;
    j["n_rows"] = m.n_rows;
    j["source"] = m.source;
    j["format_version"] = m.format_version;
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::ordered_json& j) {
    DatasetManifest m;
    try {
        m.sublayer_label = j.at("sublayer_label").get<std::string>();
        m.dim = j.at("dim").get<std::size_t>();
        m.n_rows = j.at("n_rows").get<std::size_t>();
        m.source = j.at("source").get<std::string>();
        m.format_version = j.at("format_version").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what(), 0);
    }
    m.validate();
    return m;
}

inline void write_binary_matrix(const BinarySupportMatrix& m, const std::string& path) {
    auto out = detail::open_output(path);
    write_binary_matrix(m, out);
}

inline BinarySupportMatrix read_binary_matrix(const std::string& path) {
    auto in = detail::open_input(path);
    return read_binary_matrix(in);
}

inline void write_real_matrix(const PatternMatrix& m, const std::string& path) {
    auto out = detail::open_output(path);
    write_real_matrix(m, out);
}

inline PatternMatrix read_real_matrix(const std::string& path) {
    auto in = detail::open_input(path);
    return read_real_matrix(in);
}

inline void write_codebook(const CentroidSet& cs, const std::string& path) {
    auto out = detail::open_output(path);
    write_codebook(cs, out);
}

inline CentroidSet read_codebook(const std::string& path) {
    auto in = detail::open_input(path);
    return read_codebook(in);
}

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
    m.validate();
    auto out = detail::open_output(path);
    out << manifest_to_json(m).dump(2) << '\n';
    detail::check_write(out, "manifest");
}

inline DatasetManifest read_manifest(const std::string& path) {
    auto in = detail::open_input(path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what(), 0);
    }
    return manifest_from_json(j);
}

/// A {0,1}-valued PatternMatrix mirroring a bit matrix's supports.
inline PatternMatrix expand_to_pattern(const BinarySupportMatrix& bits) {
    std::vector<double> values(bits.n_rows() * bits.n_cols(), 0.0);
    for (std::size_t r = 0; r < bits.n_rows(); ++r) {
        for (std::size_t j = 0; j < bits.n_cols(); ++j) {
            if (bits.get(r, j)) {
                values[r * bits.n_cols() + j] = 1.0;
            }
        }
    }
    return PatternMatrix(bits.n_rows(), bits.n_cols(), std::move(values));
}

/// Loads either container format by sniffing the magic: APCF rows load as-is,
/// APCB rows load as {0,1} values.
inline PatternMatrix read_pattern_auto(const std::string& path) {
    char magic[4] = {};
    {
        auto in = detail::open_input(path);
        in.read(magic, 4);
        if (in.gcount() != 4) {
            throw FormatError("unexpected end of file", 0);
        }
    }
    const std::string tag(magic, 4);
    if (tag == "APCF") {
        return read_real_matrix(path);
    }
    if (tag == "APCB") {
        return expand_to_pattern(read_binary_matrix(path));
    }
    throw FormatError("unrecognized magic '" + tag + "'", 0);
}

} // namespace apc
