#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "apc/error.hpp"
#include "apc/pattern_matrix.hpp"

namespace apc {

/// One representative pattern: the retained feature indices and the
/// (strictly positive) intensity kept for each. density_p records the
/// fraction of features the update rule aims to retain; 0 means the
/// centroid is an unconstrained binary one (baseline output).
struct Centroid {
    std::vector<std::size_t> active_set; // ascending
    std::vector<double> intensities;     // parallel to active_set
    double density_p = 0.0;
};

struct CentroidSet {
    std::size_t dim = 0;
    double density_p = 0.0;
    std::vector<Centroid> centroids;

    std::size_t k() const noexcept { return centroids.size(); }

    void validate() const {
        if (centroids.empty()) {
            throw InvalidConfigError("CentroidSet requires k >= 1");
        }
        if (dim == 0) {
            throw InvalidConfigError("CentroidSet requires dim >= 1");
        }
        if (!(density_p >= 0.0 && density_p <= 1.0)) {
            throw InvalidConfigError("CentroidSet density_p must lie in [0, 1]");
        }
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const Centroid& cen = centroids[c];
            if (cen.density_p != density_p) {
                throw InvalidConfigError("centroid " + std::to_string(c) +
                                         " disagrees with set density_p");
            }
            if (cen.intensities.size() != cen.active_set.size()) {
                throw InvalidConfigError("centroid " + std::to_string(c) +
                                         " has mismatched active_set/intensities");
            }
            for (std::size_t i = 0; i < cen.active_set.size(); ++i) {
                if (cen.active_set[i] >= dim) {
                    throw IndexError("centroid " + std::to_string(c) + " index " +
                                     std::to_string(cen.active_set[i]) + " exceeds dim");
                }
                if (i > 0 && cen.active_set[i] <= cen.active_set[i - 1]) {
                    throw InvalidConfigError("centroid " + std::to_string(c) +
                                             " active_set is not strictly ascending");
                }
                const double v = cen.intensities[i];
                if (!(std::isfinite(v) && v > 0.0)) {
                    throw DomainError("centroid " + std::to_string(c) +
                                      " intensity at position " + std::to_string(i) +
                                      " must be finite and > 0");
                }
            }
        }
    }
};

/// Per-row cluster label plus per-cluster member counts.
struct Assignment {
    std::vector<std::uint32_t> cluster_of;
    std::vector<std::uint64_t> sizes;

    std::size_t n_rows() const noexcept { return cluster_of.size(); }
    std::size_t k() const noexcept { return sizes.size(); }

    void validate() const {
        if (sizes.empty()) {
            throw InvalidConfigError("Assignment requires k >= 1");
        }
        std::vector<std::uint64_t> recount(sizes.size(), 0);
        for (std::size_t i = 0; i < cluster_of.size(); ++i) {
            if (cluster_of[i] >= sizes.size()) {
                throw IndexError("row " + std::to_string(i) + " assigned to cluster " +
                                 std::to_string(cluster_of[i]) + " but k = " +
                                 std::to_string(sizes.size()));
            }
            ++recount[cluster_of[i]];
        }
        if (recount != sizes) {
            throw InvalidConfigError("Assignment sizes disagree with labels");
        }
    }
};

inline Assignment make_assignment(std::size_t k, std::vector<std::uint32_t> cluster_of) {
    Assignment a;
    a.sizes.assign(k, 0);
    for (std::size_t i = 0; i < cluster_of.size(); ++i) {
        if (cluster_of[i] >= k) {
            throw IndexError("row " + std::to_string(i) + " assigned to cluster " +
                             std::to_string(cluster_of[i]) + " but k = " + std::to_string(k));
        }
        ++a.sizes[cluster_of[i]];
    }
    a.cluster_of = std::move(cluster_of);
    return a;
}

/// Number of features the percentile update retains: ceil(p * D), capped at D.
inline std::size_t retained_feature_count(double density_p, std::size_t dim) {
    if (!(density_p > 0.0 && density_p <= 1.0)) {
        throw InvalidConfigError("density_p must lie in (0, 1]");
    }
    const auto m = static_cast<std::size_t>(
        std::ceil(density_p * static_cast<double>(dim)));
    return m == 0 ? 1 : (m > dim ? dim : m);
}

struct ClusteringConfig {
    std::size_t k = 0;
    double density_p = 0.6;
    std::size_t capacity = 0; // 0 = ceil(N / k)
    std::size_t max_iters = 50;
    double min_reassigned_fraction = 0.001;
    std::uint64_t seed = 0;
    bool balanced = true;
    std::size_t candidate_buffer = 32;
    unsigned threads = 1;

    std::size_t effective_capacity(std::size_t n_rows) const {
        if (capacity != 0) {
            return capacity;
        }
        return (n_rows + k - 1) / k;
    }

    void validate(std::size_t n_rows) const {
        if (k == 0) {
            throw InvalidConfigError("k must be >= 1");
        }
        if (k > n_rows) {
            throw InvalidConfigError("k = " + std::to_string(k) + " exceeds n_rows = " +
                                     std::to_string(n_rows));
        }
        if (k > std::numeric_limits<std::uint32_t>::max()) {
            throw InvalidConfigError("k exceeds the supported cluster-index range");
        }
        if (!(density_p > 0.0 && density_p <= 1.0)) {
            throw InvalidConfigError("density_p must lie in (0, 1]");
        }
        if (max_iters == 0) {
            throw InvalidConfigError("max_iters must be >= 1");
        }
        if (!(min_reassigned_fraction >= 0.0 && min_reassigned_fraction <= 1.0)) {
            throw InvalidConfigError("min_reassigned_fraction must lie in [0, 1]");
        }
        if (candidate_buffer == 0) {
            throw InvalidConfigError("candidate_buffer must be >= 1");
        }
        const std::size_t cap = effective_capacity(n_rows);
        const std::size_t need = (n_rows + k - 1) / k; // capacity*k >= N without overflow
        if (cap < need) {
            throw CapacityError("capacity " + std::to_string(cap) + " x k " +
                                std::to_string(k) + " cannot hold " +
                                std::to_string(n_rows) + " rows");
        }
    }
};

enum class EmptyClusterPolicy {
    None,
    ReseedToFarthest,
};

struct BaselineConfig {
    std::size_t k = 0;
    std::size_t max_iters = 50;
    std::uint64_t seed = 0;
    EmptyClusterPolicy empty_cluster_policy = EmptyClusterPolicy::ReseedToFarthest;
    unsigned threads = 1;

    void validate(std::size_t n_rows) const {
        if (k == 0) {
            throw InvalidConfigError("k must be >= 1");
        }
        if (k > n_rows) {
            throw InvalidConfigError("k = " + std::to_string(k) + " exceeds n_rows = " +
                                     std::to_string(n_rows));
        }
        if (k > std::numeric_limits<std::uint32_t>::max()) {
            throw InvalidConfigError("k exceeds the supported cluster-index range");
        }
        if (max_iters == 0) {
            throw InvalidConfigError("max_iters must be >= 1");
        }
    }
};

/// Bit-packed view of every centroid's active set, one row per centroid.
inline BinarySupportMatrix centroid_masks(const CentroidSet& codebook) {
    BinarySupportMatrix masks(codebook.k(), codebook.dim);
    for (std::size_t c = 0; c < codebook.k(); ++c) {
        for (std::size_t j : codebook.centroids[c].active_set) {
            masks.set_bit(c, j);
        }
    }
    return masks;
}

/// Binary state of each row's assigned centroid (the C matrix paired with
/// the data's A matrix).
inline BinarySupportMatrix expand_assigned(const CentroidSet& codebook,
                                           const Assignment& assignment) {
    if (assignment.k() != codebook.k()) {
        throw DimensionError("assignment has " + std::to_string(assignment.k()) +
                             " clusters but codebook has " + std::to_string(codebook.k()));
    }
    const BinarySupportMatrix masks = centroid_masks(codebook);
    BinarySupportMatrix out(assignment.n_rows(), codebook.dim);
    for (std::size_t i = 0; i < assignment.n_rows(); ++i) {
        const std::uint32_t c = assignment.cluster_of[i];
        if (c >= codebook.k()) {
            throw IndexError("row " + std::to_string(i) + " assigned to missing cluster " +
                             std::to_string(c));
        }
        for (std::size_t j : codebook.centroids[c].active_set) {
            out.set_bit(i, j);
        }
    }
    return out;
}

} // namespace apc
