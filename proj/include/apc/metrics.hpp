#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "apc/bitops.hpp"
#include "apc/clustering_types.hpp"
#include "apc/error.hpp"
#include "apc/parallel.hpp"
#include "apc/pattern_matrix.hpp"
#include "apc/text.hpp"

namespace apc {

/// Fraction of the data's active bits that are also active in the assigned
/// centroids: sum(A & C) / sum(A). Both matrices are N x D with C's row i
/// holding the binary state of the centroid assigned to data row i.
inline double clustering_precision(const BinarySupportMatrix& data,
                                   const BinarySupportMatrix& assigned_centroids,
                                   unsigned threads = 1) {
    if (data.n_rows() != assigned_centroids.n_rows() ||
        data.n_cols() != assigned_centroids.n_cols()) {
        throw DimensionError("data is " + std::to_string(data.n_rows()) + "x" +
                             std::to_string(data.n_cols()) + " but assigned centroids are " +
                             std::to_string(assigned_centroids.n_rows()) + "x" +
                             std::to_string(assigned_centroids.n_cols()));
    }
    std::vector<std::uint64_t> covered(data.n_rows());
    std::vector<std::uint64_t> active(data.n_rows());
    parallel_for(data.n_rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            covered[i] = popcount_and(data.row_words(i), assigned_centroids.row_words(i));
            active[i] = data.row_popcount(i);
        }
    });
    std::uint64_t num = 0;
    std::uint64_t den = 0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        num += covered[i];
        den += active[i];
    }
    if (den == 0) {
        throw UndefinedMetricError("precision is undefined: no active neurons in the data");
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

/// Count of element-wise disagreements between data bits and assigned bits.
inline std::uint64_t clustering_error(const BinarySupportMatrix& data,
                                      const BinarySupportMatrix& assigned_centroids,
                                      unsigned threads = 1) {
    if (data.n_rows() != assigned_centroids.n_rows() ||
        data.n_cols() != assigned_centroids.n_cols()) {
        throw DimensionError("data is " + std::to_string(data.n_rows()) + "x" +
                             std::to_string(data.n_cols()) + " but assigned centroids are " +
                             std::to_string(assigned_centroids.n_rows()) + "x" +
                             std::to_string(assigned_centroids.n_cols()));
    }
    std::vector<std::uint64_t> diff(data.n_rows());
    parallel_for(data.n_rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            diff[i] = popcount_xor(data.row_words(i), assigned_centroids.row_words(i));
        }
    });
    std::uint64_t total = 0;
    for (std::uint64_t d : diff) {
        total += d;
    }
    return total;
}

inline double element_accuracy(std::uint64_t total, std::uint64_t error) {
    if (total == 0) {
        throw DomainError("element_accuracy requires total > 0");
    }
    if (error > total) {
        throw DomainError("error count " + std::to_string(error) + " exceeds total " +
                          std::to_string(total));
    }
    return static_cast<double>(total - error) / static_cast<double>(total);
}

struct MetricsReport {
    std::size_t k = 0;
    double density_p = 0.0;
    double precision = 0.0;
    std::uint64_t error_count = 0;
    std::uint64_t total_elements = 0;
    double element_accuracy = 0.0;
    std::uint64_t total_active = 0;
    std::vector<std::uint64_t> cluster_sizes;
};

inline MetricsReport build_report(const BinarySupportMatrix& data,
                                  const CentroidSet& codebook,
                                  const Assignment& assignment,
                                  unsigned threads = 1) {
    if (assignment.n_rows() != data.n_rows()) {
        throw DimensionError("assignment covers " + std::to_string(assignment.n_rows()) +
                             " rows but data has " + std::to_string(data.n_rows()));
    }
    if (codebook.dim != data.n_cols()) {
        throw DimensionError("codebook dim " + std::to_string(codebook.dim) +
                             " does not match data n_cols " + std::to_string(data.n_cols()));
    }
    if (assignment.k() != codebook.k()) {
        throw DimensionError("assignment has " + std::to_string(assignment.k()) +
                             " clusters but codebook has " + std::to_string(codebook.k()));
    }
    for (std::size_t i = 0; i < assignment.n_rows(); ++i) {
        if (assignment.cluster_of[i] >= codebook.k()) {
            throw IndexError("row " + std::to_string(i) + " assigned to missing cluster " +
                             std::to_string(assignment.cluster_of[i]));
        }
    }

    const BinarySupportMatrix masks = centroid_masks(codebook);
    std::vector<std::uint64_t> covered(data.n_rows());
    std::vector<std::uint64_t> active(data.n_rows());
    std::vector<std::uint64_t> diff(data.n_rows());
    parallel_for(data.n_rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto row = data.row_words(i);
            const auto mask = masks.row_words(assignment.cluster_of[i]);
            covered[i] = popcount_and(row, mask);
            diff[i] = popcount_xor(row, mask);
            active[i] = data.row_popcount(i);
        }
    });

    std::uint64_t num = 0;
    std::uint64_t den = 0;
    std::uint64_t err = 0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        num += covered[i];
        den += active[i];
        err += diff[i];
    }
    if (den == 0) {
        throw UndefinedMetricError("precision is undefined: no active neurons in the data");
    }

    MetricsReport r;
    r.k = codebook.k();
    r.density_p = codebook.density_p;
    r.precision = static_cast<double>(num) / static_cast<double>(den);
    r.error_count = err;
    r.total_elements = static_cast<std::uint64_t>(data.n_rows()) * data.n_cols();
    r.element_accuracy = element_accuracy(r.total_elements, r.error_count);
    r.total_active = den;
    r.cluster_sizes = assignment.sizes;
    return r;
}

inline MetricsReport build_report(const PatternMatrix& data,
                                  const CentroidSet& codebook,
                                  const Assignment& assignment,
                                  unsigned threads = 1) {
    return build_report(BinarySupportMatrix::from_pattern(data), codebook, assignment,
                        threads);
}

inline nlohmann::ordered_json report_to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["density_p"] = r.density_p;
    j["precision"] = r.precision;
    j["error_count"] = r.error_count;
    j["total_elements"] = r.total_elements;
    j["element_accuracy"] = r.element_accuracy;
    j["total_active"] = r.total_active;
    j["cluster_sizes"] = r.cluster_sizes;
    return j;
}

inline std::string report_csv_header() {
    return "k,density_p,precision,error_count,total_elements,element_accuracy,total_active";
}

inline std::string report_csv_row(const MetricsReport& r) {
    std::string row = std::to_string(r.k);
    row += ',';
    row += format_double(r.density_p);
    row += ',';
    row += format_double(r.precision);
    row += ',';
    row += std::to_string(r.error_count);
    row += ',';
    row += std::to_string(r.total_elements);
    row += ',';
    row += format_double(r.element_accuracy);
    row += ',';
    row += std::to_string(r.total_active);
    return row;
}

} // namespace apc
