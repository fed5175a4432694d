#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "apc/bitops.hpp"
#include "apc/clustering_types.hpp"
#include "apc/error.hpp"
#include "apc/metrics.hpp"
#include "apc/parallel.hpp"
#include "apc/pattern_matrix.hpp"
#include "apc/rng.hpp"

namespace apc {

inline constexpr std::uint64_t kBmfInitStream = 0xB3F1;
inline constexpr std::uint64_t kBrbkInitStream = 0xB3F2;

struct BaselineIterationStats {
    std::size_t iter = 0;
    std::size_t reassigned = 0;
    double precision = 0.0;
    double objective = 0.0;
};

struct BaselineResult {
    CentroidSet codebook;
    Assignment assignment;
    MetricsReport report;
    std::vector<BaselineIterationStats> trace;
};

namespace detail {

inline std::uint64_t hamming(std::span<const std::uint64_t> row, std::uint64_t row_pop,
                             std::span<const std::uint64_t> mask, std::uint64_t mask_pop) {
    return row_pop + mask_pop - 2 * popcount_and(row, mask);
}

inline CentroidSet binary_centroid_set(const BinarySupportMatrix& centroids) {
    CentroidSet cs;
    cs.dim = centroids.n_cols();
    cs.density_p = 0.0;
    cs.centroids.resize(centroids.n_rows());
    for (std::size_t c = 0; c < centroids.n_rows(); ++c) {
        Centroid& out = cs.centroids[c];
        for (std::size_t j = 0; j < centroids.n_cols(); ++j) {
            if (centroids.get(c, j)) {
                out.active_set.push_back(j);
                out.intensities.push_back(1.0);
            }
        }
    }
    return cs;
}

inline std::vector<std::uint64_t> all_row_pops(const BinarySupportMatrix& m) {
    std::vector<std::uint64_t> pops(m.n_rows());
    for (std::size_t i = 0; i < m.n_rows(); ++i) {
        pops[i] = m.row_popcount(i);
    }
    return pops;
}

/// Min (Hamming, centroid index) assignment; per-row chosen distances out.
inline std::vector<std::uint32_t> hamming_assign(const BinarySupportMatrix& data,
                                                 const std::vector<std::uint64_t>& row_pops,
                                                 const BinarySupportMatrix& centroids,
                                                 const std::vector<std::uint64_t>& cent_pops,
                                                 std::vector<std::uint64_t>& chosen_dist,
                                                 unsigned threads) {
    const std::size_t n = data.n_rows();
    const std::size_t k = centroids.n_rows();
    std::vector<std::uint32_t> labels(n);
    chosen_dist.resize(n);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto row = data.row_words(i);
            std::uint32_t best_c = 0;
            std::uint64_t best_h = hamming(row, row_pops[i], centroids.row_words(0),
                                           cent_pops[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const std::uint64_t h = hamming(row, row_pops[i], centroids.row_words(c),
                                                cent_pops[c]);
                if (h < best_h) {
                    best_h = h;
                    best_c = static_cast<std::uint32_t>(c);
                }
            }
            labels[i] = best_c;
            chosen_dist[i] = best_h;
        }
    });
    return labels;
}

inline std::vector<std::vector<std::uint32_t>> member_lists(
    const std::vector<std::uint32_t>& labels, std::size_t k) {
    std::vector<std::vector<std::uint32_t>> members(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[labels[i]].push_back(static_cast<std::uint32_t>(i));
    }
    return members;
}

/// Rows farthest from their assigned centroid, one distinct row per empty
/// cluster (ties to the lower row index).
inline std::vector<std::uint32_t> farthest_rows(const std::vector<std::uint64_t>& dist,
                                                std::size_t count) {
    std::vector<std::uint32_t> rows(dist.size());
    std::iota(rows.begin(), rows.end(), std::uint32_t{0});
    std::partial_sort(rows.begin(), rows.begin() + count, rows.end(),
                      [&dist](std::uint32_t a, std::uint32_t b) {
                          if (dist[a] != dist[b]) {
                              return dist[a] > dist[b];
                          }
                          return a < b;
                      });
    rows.resize(count);
    return rows;
}

inline double trace_precision(const BinarySupportMatrix& data,
                              const std::vector<std::uint64_t>& row_pops,
                              const BinarySupportMatrix& centroids,
                              const std::vector<std::uint32_t>& labels) {
    std::uint64_t num = 0;
    std::uint64_t den = 0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        num += popcount_and(data.row_words(i), centroids.row_words(labels[i]));
        den += row_pops[i];
    }
    if (den == 0) {
        throw UndefinedMetricError("precision is undefined: no active neurons in the data");
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace detail

/// One-hot alternating binary clustering: Hamming assignment against binary
/// centroids, then a per-bit majority vote (strict majority sets the bit,
/// exact ties clear it), repeated until no row moves or max_iters.
inline BaselineResult cluster_bmf(const BinarySupportMatrix& data,
                                  const BaselineConfig& config) {
    config.validate(data.n_rows());
    if (data.n_rows() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidConfigError("n_rows exceeds the supported row-index range");
    }
    const std::size_t n = data.n_rows();
    const std::size_t dim = data.n_cols();
    const std::size_t k = config.k;
    const std::vector<std::uint64_t> row_pops = detail::all_row_pops(data);

    BinarySupportMatrix centroids(k, dim);
    {
        SplitMix64 rng(derive_stream(config.seed, kBmfInitStream));
        const std::vector<std::size_t> seeds = sample_without_replacement(n, k, rng);
        for (std::size_t c = 0; c < k; ++c) {
            const auto src = data.row_words(seeds[c]);
            std::copy(src.begin(), src.end(), centroids.row_words_mut(c).begin());
        }
    }

    BaselineResult result;
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> prev_labels;
    std::vector<std::uint64_t> chosen_dist;
    std::vector<std::uint64_t> cent_pops(k);

    for (std::size_t t = 1; t <= config.max_iters; ++t) {
        for (std::size_t c = 0; c < k; ++c) {
            cent_pops[c] = centroids.row_popcount(c);
        }
        labels = detail::hamming_assign(data, row_pops, centroids, cent_pops, chosen_dist,
                                        config.threads);

        std::size_t reassigned = n;
        if (!prev_labels.empty()) {
            reassigned = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] != prev_labels[i]) {
                    ++reassigned;
                }
            }
        }
        std::uint64_t objective = 0;
        for (std::uint64_t d : chosen_dist) {
            objective += d;
        }
        const double precision = detail::trace_precision(data, row_pops, centroids, labels);
        result.trace.push_back({t, reassigned, precision,
                                static_cast<double>(objective)});

        if (reassigned == 0 || t == config.max_iters) {
            break;
        }
        prev_labels = labels;

        const auto members = detail::member_lists(labels, k);
        parallel_for(k, config.threads, [&](std::size_t begin, std::size_t end) {
            std::vector<std::uint64_t> counts(dim);
            for (std::size_t c = begin; c < end; ++c) {
                if (members[c].empty()) {
                    continue;
                }
                std::fill(counts.begin(), counts.end(), 0);
                for (std::uint32_t r : members[c]) {
                    for (std::size_t j = 0; j < dim; ++j) {
                        if (data.get(r, j)) {
                            ++counts[j];
                        }
                    }
                }
                auto words = centroids.row_words_mut(c);
                std::fill(words.begin(), words.end(), 0);
                for (std::size_t j = 0; j < dim; ++j) {
                    if (2 * counts[j] > members[c].size()) {
                        centroids.set_bit(c, j);
                    }
                }
            }
        });

        if (config.empty_cluster_policy == EmptyClusterPolicy::ReseedToFarthest) {
            std::vector<std::uint32_t> empties;
            for (std::size_t c = 0; c < k; ++c) {
                if (members[c].empty()) {
                    empties.push_back(static_cast<std::uint32_t>(c));
                }
            }
            if (!empties.empty()) {
                const auto sources = detail::farthest_rows(chosen_dist, empties.size());
                for (std::size_t e = 0; e < empties.size(); ++e) {
                    const auto src = data.row_words(sources[e]);
                    std::copy(src.begin(), src.end(),
                              centroids.row_words_mut(empties[e]).begin());
                }
            }
        }
    }

    result.codebook = detail::binary_centroid_set(centroids);
    result.assignment = make_assignment(k, std::move(labels));
    result.report = build_report(data, result.codebook, result.assignment, config.threads);
    return result;
}

/// Binary-to-real-and-back k-means: lift bits to {0.0, 1.0}, run Lloyd
/// iterations with squared-Euclidean distance and mean updates, binarize the
/// final centroids at 0.5 (ties to 1), then reassign once by Hamming
/// distance for reporting.
inline BaselineResult cluster_brb_kmeans(const BinarySupportMatrix& data,
                                         const BaselineConfig& config) {
    config.validate(data.n_rows());
    if (data.n_rows() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidConfigError("n_rows exceeds the supported row-index range");
    }
    const std::size_t n = data.n_rows();
    const std::size_t dim = data.n_cols();
    const std::size_t k = config.k;
    const std::vector<std::uint64_t> row_pops = detail::all_row_pops(data);

    std::vector<std::vector<std::uint32_t>> supports(n);
    for (std::size_t i = 0; i < n; ++i) {
        supports[i].reserve(row_pops[i]);
        for (std::size_t j = 0; j < dim; ++j) {
            if (data.get(i, j)) {
                supports[i].push_back(static_cast<std::uint32_t>(j));
            }
        }
    }

    std::vector<double> centroids(k * dim, 0.0);
    {
        SplitMix64 rng(derive_stream(config.seed, kBrbkInitStream));
        const std::vector<std::size_t> seeds = sample_without_replacement(n, k, rng);
        for (std::size_t c = 0; c < k; ++c) {
            for (std::uint32_t j : supports[seeds[c]]) {
                centroids[c * dim + j] = 1.0;
            }
        }
    }

    const auto binarize = [&](const std::vector<double>& cent) {
        BinarySupportMatrix out(k, dim);
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t j = 0; j < dim; ++j) {
                if (cent[c * dim + j] >= 0.5) {
                    out.set_bit(c, j);
                }
            }
        }
        return out;
    };

    BaselineResult result;
    std::vector<std::uint32_t> labels(n);
    std::vector<std::uint32_t> prev_labels;
    std::vector<double> chosen_dist(n);
    std::vector<double> sumsq(k);

    for (std::size_t t = 1; t <= config.max_iters; ++t) {
        for (std::size_t c = 0; c < k; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double v = centroids[c * dim + j];
                s += v * v;
            }
            sumsq[c] = s;
        }
        parallel_for(n, config.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                std::uint32_t best_c = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    double dot = 0.0;
                    const double* cent = centroids.data() + c * dim;
                    for (std::uint32_t j : supports[i]) {
                        dot += cent[j];
                    }
                    const double d = sumsq[c] - 2.0 * dot +
                                     static_cast<double>(row_pops[i]);
                    if (d < best_d) {
                        best_d = d;
                        best_c = static_cast<std::uint32_t>(c);
                    }
                }
                labels[i] = best_c;
                chosen_dist[i] = best_d;
            }
        });

        std::size_t reassigned = n;
        if (!prev_labels.empty()) {
            reassigned = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] != prev_labels[i]) {
                    ++reassigned;
                }
            }
        }
        double objective = 0.0;
        for (double d : chosen_dist) {
            objective += d;
        }
        const BinarySupportMatrix snapshot = binarize(centroids);
        const double precision = detail::trace_precision(data, row_pops, snapshot, labels);
        result.trace.push_back({t, reassigned, precision, objective});

        if (reassigned == 0 || t == config.max_iters) {
            break;
        }
        prev_labels = labels;

        const auto members = detail::member_lists(labels, k);
        parallel_for(k, config.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t c = begin; c < end; ++c) {
                if (members[c].empty()) {
                    continue;
                }
                double* cent = centroids.data() + c * dim;
                std::fill(cent, cent + dim, 0.0);
                for (std::uint32_t r : members[c]) {
                    for (std::uint32_t j : supports[r]) {
                        cent[j] += 1.0;
                    }
                }
                const double inv = 1.0 / static_cast<double>(members[c].size());
                for (std::size_t j = 0; j < dim; ++j) {
                    cent[j] *= inv;
                }
            }
        });

        if (config.empty_cluster_policy == EmptyClusterPolicy::ReseedToFarthest) {
            std::vector<std::uint32_t> empties;
            for (std::size_t c = 0; c < k; ++c) {
                if (members[c].empty()) {
                    empties.push_back(static_cast<std::uint32_t>(c));
                }
            }
            if (!empties.empty()) {
                std::vector<std::uint32_t> rows(n);
                std::iota(rows.begin(), rows.end(), std::uint32_t{0});
                std::partial_sort(rows.begin(), rows.begin() + empties.size(), rows.end(),
                                  [&](std::uint32_t a, std::uint32_t b) {
                                      if (chosen_dist[a] != chosen_dist[b]) {
                                          return chosen_dist[a] > chosen_dist[b];
                                      }
                                      return a < b;
                                  });
                for (std::size_t e = 0; e < empties.size(); ++e) {
                    double* cent = centroids.data() + empties[e] * dim;
                    std::fill(cent, cent + dim, 0.0);
                    for (std::uint32_t j : supports[rows[e]]) {
                        cent[j] = 1.0;
                    }
                }
            }
        }
    }

    const BinarySupportMatrix binary = binarize(centroids);
    std::vector<std::uint64_t> cent_pops(k);
    for (std::size_t c = 0; c < k; ++c) {
        cent_pops[c] = binary.row_popcount(c);
    }
    std::vector<std::uint64_t> final_dist;
    std::vector<std::uint32_t> final_labels = detail::hamming_assign(
        data, row_pops, binary, cent_pops, final_dist, config.threads);

    result.codebook = detail::binary_centroid_set(binary);
    result.assignment = make_assignment(k, std::move(final_labels));
    result.report = build_report(data, result.codebook, result.assignment, config.threads);
    return result;
}

inline BaselineResult cluster_bmf(const PatternMatrix& data, const BaselineConfig& config) {
    return cluster_bmf(BinarySupportMatrix::from_pattern(data), config);
}

inline BaselineResult cluster_brb_kmeans(const PatternMatrix& data,
                                         const BaselineConfig& config) {
    return cluster_brb_kmeans(BinarySupportMatrix::from_pattern(data), config);
}

/// Nearest-centroid Hamming assignment against any codebook's binary view.
inline Assignment nearest_assign_hamming(const BinarySupportMatrix& data,
                                         const CentroidSet& codebook,
                                         unsigned threads = 1) {
    if (codebook.dim != data.n_cols()) {
        throw DimensionError("codebook dim " + std::to_string(codebook.dim) +
                             " does not match data n_cols " + std::to_string(data.n_cols()));
    }
    const BinarySupportMatrix masks = centroid_masks(codebook);
    const std::vector<std::uint64_t> row_pops = detail::all_row_pops(data);
    std::vector<std::uint64_t> cent_pops(codebook.k());
    for (std::size_t c = 0; c < codebook.k(); ++c) {
        cent_pops[c] = masks.row_popcount(c);
    }
    std::vector<std::uint64_t> dist;
    std::vector<std::uint32_t> labels =
        detail::hamming_assign(data, row_pops, masks, cent_pops, dist, threads);
    return make_assignment(codebook.k(), std::move(labels));
}

} // namespace apc
