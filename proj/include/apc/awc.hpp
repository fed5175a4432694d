#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
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

inline constexpr std::uint64_t kAwcInitStream = 0xA1C1;

/// Percentile update applied to one row: keep the ceil(p * D) largest values
/// (ties to the lower index), drop exact zeros, store ascending.
inline Centroid single_row_centroid(std::span<const double> row, double density_p) {
    const std::size_t dim = row.size();
    const std::size_t m = retained_feature_count(density_p, dim);
    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + m, order.end(),
                      [row](std::size_t a, std::size_t b) {
                          if (row[a] != row[b]) {
                              return row[a] > row[b];
                          }
                          return a < b;
                      });
    order.resize(m);
    std::sort(order.begin(), order.end());
    Centroid c;
    c.density_p = density_p;
    for (std::size_t j : order) {
        if (row[j] > 0.0) {
            c.active_set.push_back(j);
            c.intensities.push_back(row[j]);
        }
    }
    return c;
}

/// Seeds k centroids from k distinct rows sampled with the given seed, each
/// row run through the single-row percentile update.
inline CentroidSet init_centroids(const PatternMatrix& data, std::size_t k,
                                  double density_p, std::uint64_t seed) {
    if (k == 0 || k > data.n_rows()) {
        throw InvalidConfigError("k = " + std::to_string(k) + " must lie in [1, n_rows = " +
                                 std::to_string(data.n_rows()) + "]");
    }
    SplitMix64 rng(derive_stream(seed, kAwcInitStream));
    const std::vector<std::size_t> rows = sample_without_replacement(data.n_rows(), k, rng);
    CentroidSet cs;
    cs.dim = data.n_cols();
    cs.density_p = density_p;
    cs.centroids.reserve(k);
    for (std::size_t r : rows) {
        cs.centroids.push_back(single_row_centroid(data.row(r), density_p));
    }
    return cs;
}

/// Distance that scores only the row's own active neurons:
/// 1 - |supp(row) & active_set| / |supp(row)|. An empty-support row is at
/// distance 1 from every centroid.
inline double active_overlap_distance(std::span<const double> row, const Centroid& c) {
    std::uint64_t support = 0;
    std::uint64_t overlap = 0;
    std::size_t pos = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] > 0.0) {
            ++support;
            while (pos < c.active_set.size() && c.active_set[pos] < j) {
                ++pos;
            }
            if (pos < c.active_set.size() && c.active_set[pos] == j) {
                ++overlap;
            }
        }
    }
    if (support == 0) {
        return 1.0;
    }
    return 1.0 - static_cast<double>(overlap) / static_cast<double>(support);
}

inline double active_overlap_distance(const PatternMatrix& data, std::size_t row,
                                      const CentroidSet& codebook, std::size_t centroid) {
    if (codebook.dim != data.n_cols()) {
        throw DimensionError("codebook dim " + std::to_string(codebook.dim) +
                             " does not match data n_cols " + std::to_string(data.n_cols()));
    }
    if (centroid >= codebook.k()) {
        throw IndexError("centroid " + std::to_string(centroid) + " out of range");
    }
    return active_overlap_distance(data.row(row), codebook.centroids[centroid]);
}

namespace detail {

/// Distances are compared as exact rationals: d = 1 - o/s, so
/// d_a < d_b iff o_a * s_b > o_b * s_a. s is clamped to 1 for empty rows.
struct OverlapOrder {
    // true when (o_a, s_a) is strictly closer than (o_b, s_b)
    static bool closer(std::uint64_t o_a, std::uint64_t s_a,
                       std::uint64_t o_b, std::uint64_t s_b) {
        return o_a * s_b > o_b * s_a;
    }
    static bool equal(std::uint64_t o_a, std::uint64_t s_a,
                      std::uint64_t o_b, std::uint64_t s_b) {
        return o_a * s_b == o_b * s_a;
    }
};

struct AssignProblem {
    const BinarySupportMatrix& bits;
    BinarySupportMatrix masks;
    std::vector<std::uint32_t> row_support; // |supp|, clamped to >= 1

    AssignProblem(const BinarySupportMatrix& data, const CentroidSet& codebook)
        : bits(data), masks(centroid_masks(codebook)) {
        row_support.resize(data.n_rows());
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            const std::uint64_t s = data.row_popcount(i);
            row_support[i] = static_cast<std::uint32_t>(s == 0 ? 1 : s);
        }
    }

    std::uint32_t overlap(std::size_t row, std::size_t c) const {
        return static_cast<std::uint32_t>(
            popcount_and(bits.row_words(row), masks.row_words(c)));
    }

    std::size_t k() const { return masks.n_rows(); }
    std::size_t n() const { return bits.n_rows(); }
};

inline Assignment nearest_assign_impl(const AssignProblem& p, unsigned threads) {
    std::vector<std::uint32_t> labels(p.n());
    parallel_for(p.n(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::uint32_t best_c = 0;
            std::uint32_t best_o = p.overlap(i, 0);
            for (std::size_t c = 1; c < p.k(); ++c) {
                const std::uint32_t o = p.overlap(i, c);
                if (o > best_o) {
                    best_o = o;
                    best_c = static_cast<std::uint32_t>(c);
                }
            }
            labels[i] = best_c;
        }
    });
    return make_assignment(p.k(), std::move(labels));
}

inline Assignment balanced_assign_impl(const AssignProblem& p, std::size_t capacity,
                                       unsigned threads, std::size_t candidate_buffer) {
    const std::size_t n = p.n();
    const std::size_t k = p.k();
    const std::size_t width = std::min(candidate_buffer, k);

    // Per row, the top `width` centroids by ascending (distance, centroid).
    // With s fixed per row that is descending overlap, ties to the lower index.
    std::vector<std::uint32_t> cand_c(n * width);
    std::vector<std::uint32_t> cand_o(n * width);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> o(k);
        std::vector<std::uint32_t> order(k);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t c = 0; c < k; ++c) {
                o[c] = p.overlap(i, c);
            }
            std::iota(order.begin(), order.end(), std::uint32_t{0});
            std::partial_sort(order.begin(), order.begin() + width, order.end(),
                              [&o](std::uint32_t a, std::uint32_t b) {
                                  if (o[a] != o[b]) {
                                      return o[a] > o[b];
                                  }
                                  return a < b;
                              });
            for (std::size_t s = 0; s < width; ++s) {
                cand_c[i * width + s] = order[s];
                cand_o[i * width + s] = o[order[s]];
            }
        }
    });

    struct Pending {
        std::uint32_t o;
        std::uint32_t row;
        std::uint32_t c;
        std::uint32_t cursor; // == width means the entry came from a fallback scan
    };
    // Pops ascending (distance, row, centroid); Cmp(a, b) = "a pops after b".
    const auto& sup = p.row_support;
    auto cmp = [&sup](const Pending& a, const Pending& b) {
        const std::uint64_t lhs = std::uint64_t{a.o} * sup[b.row];
        const std::uint64_t rhs = std::uint64_t{b.o} * sup[a.row];
        if (lhs != rhs) {
            return lhs < rhs;
        }
        if (a.row != b.row) {
            return a.row > b.row;
        }
        return a.c > b.c;
    };
    std::priority_queue<Pending, std::vector<Pending>, decltype(cmp)> heap(cmp);
    for (std::size_t i = 0; i < n; ++i) {
        heap.push({cand_o[i * width], static_cast<std::uint32_t>(i), cand_c[i * width], 0});
    }

    std::vector<std::uint32_t> labels(n, 0);
    std::vector<std::uint64_t> sizes(k, 0);
    std::size_t assigned = 0;
    while (assigned < n) {
        Pending e = heap.top();
        heap.pop();
        if (sizes[e.c] < capacity) {
            labels[e.row] = e.c;
            ++sizes[e.c];
            ++assigned;
            continue;
        }
        // Centroid filled up since this entry was queued; move to the row's
        // next candidate whose centroid still has room.
        std::size_t cursor = (e.cursor == width) ? width : e.cursor + 1;
        bool pushed = false;
        while (cursor < width) {
            const std::uint32_t c = cand_c[e.row * width + cursor];
            if (sizes[c] < capacity) {
                heap.push({cand_o[e.row * width + cursor], e.row, c,
                           static_cast<std::uint32_t>(cursor)});
                pushed = true;
                break;
            }
            ++cursor;
        }
        if (!pushed) {
            // Buffer exhausted: rescan every centroid with room. Candidates
            // the buffer skipped had full centroids, which stay full, so the
            // rescan never surfaces anything ahead of the greedy order.
            // capacity * k >= n guarantees a centroid with room exists.
            bool found = false;
            std::uint32_t best_c = 0;
            std::uint32_t best_o = 0;
            for (std::size_t c = 0; c < k; ++c) {
                if (sizes[c] >= capacity) {
                    continue;
                }
                const std::uint32_t o = p.overlap(e.row, c);
                if (!found || o > best_o) {
                    found = true;
                    best_c = static_cast<std::uint32_t>(c);
                    best_o = o;
                }
            }
            heap.push({best_o, e.row, best_c, static_cast<std::uint32_t>(width)});
        }
    }

    Assignment a;
    a.cluster_of = std::move(labels);
    a.sizes = std::move(sizes);
    return a;
}

} // namespace detail

/// Globally greedy capacity-limited assignment: candidates are consumed in
/// ascending (distance, row, centroid) order and accepted while the row is
/// unassigned and the centroid has room.
inline Assignment balanced_assign(const BinarySupportMatrix& data,
                                  const CentroidSet& codebook, std::size_t capacity,
                                  unsigned threads = 1, std::size_t candidate_buffer = 32) {
    if (codebook.dim != data.n_cols()) {
        throw DimensionError("codebook dim " + std::to_string(codebook.dim) +
                             " does not match data n_cols " + std::to_string(data.n_cols()));
    }
    if (capacity == 0 ||
        (data.n_rows() + codebook.k() - 1) / codebook.k() > capacity) {
        throw CapacityError("capacity " + std::to_string(capacity) + " x k " +
                            std::to_string(codebook.k()) + " cannot hold " +
                            std::to_string(data.n_rows()) + " rows");
    }
    if (candidate_buffer == 0) {
        throw InvalidConfigError("candidate_buffer must be >= 1");
    }
    detail::AssignProblem p(data, codebook);
    return detail::balanced_assign_impl(p, capacity, threads, candidate_buffer);
}

inline Assignment balanced_assign(const PatternMatrix& data, const CentroidSet& codebook,
                                  std::size_t capacity, unsigned threads = 1,
                                  std::size_t candidate_buffer = 32) {
    return balanced_assign(BinarySupportMatrix::from_pattern(data), codebook, capacity,
                           threads, candidate_buffer);
}

/// Pure nearest-centroid assignment (no capacity), ties to the lower index.
inline Assignment nearest_assign(const BinarySupportMatrix& data,
                                 const CentroidSet& codebook, unsigned threads = 1) {
    if (codebook.dim != data.n_cols()) {
        throw DimensionError("codebook dim " + std::to_string(codebook.dim) +
                             " does not match data n_cols " + std::to_string(data.n_cols()));
    }
    detail::AssignProblem p(data, codebook);
    return detail::nearest_assign_impl(p, threads);
}

inline Assignment nearest_assign(const PatternMatrix& data, const CentroidSet& codebook,
                                 unsigned threads = 1) {
    return nearest_assign(BinarySupportMatrix::from_pattern(data), codebook, threads);
}

/// Per cluster: sum activation values feature-wise over members, keep the
/// ceil(p * D) largest sums (ties to the lower index), drop zero sums. A
/// cluster with no members yields an empty centroid; callers reseed it.
inline CentroidSet update_centroids(const PatternMatrix& data, const Assignment& assignment,
                                    double density_p, unsigned threads = 1) {
    if (assignment.n_rows() != data.n_rows()) {
        throw DimensionError("assignment covers " + std::to_string(assignment.n_rows()) +
                             " rows but data has " + std::to_string(data.n_rows()));
    }
    assignment.validate();
    const std::size_t k = assignment.k();
    const std::size_t dim = data.n_cols();
    const std::size_t m = retained_feature_count(density_p, dim);

    std::vector<std::vector<std::uint32_t>> members(k);
    for (std::size_t c = 0; c < k; ++c) {
        members[c].reserve(assignment.sizes[c]);
    }
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        members[assignment.cluster_of[i]].push_back(static_cast<std::uint32_t>(i));
    }

    CentroidSet cs;
    cs.dim = dim;
    cs.density_p = density_p;
    cs.centroids.resize(k);
    // Member rows are summed in ascending row order per cluster, so results
    // do not depend on the thread count.
    parallel_for(k, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> sums(dim);
        std::vector<std::size_t> order(dim);
        for (std::size_t c = begin; c < end; ++c) {
            Centroid& out = cs.centroids[c];
            out.density_p = density_p;
            if (members[c].empty()) {
                continue;
            }
            std::fill(sums.begin(), sums.end(), 0.0);
            for (std::uint32_t r : members[c]) {
                const auto row = data.row(r);
                for (std::size_t j = 0; j < dim; ++j) {
                    sums[j] += row[j];
                }
            }
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::partial_sort(order.begin(), order.begin() + m, order.end(),
                              [&sums](std::size_t a, std::size_t b) {
                                  if (sums[a] != sums[b]) {
                                      return sums[a] > sums[b];
                                  }
                                  return a < b;
                              });
            std::vector<std::size_t> selected(order.begin(), order.begin() + m);
            std::sort(selected.begin(), selected.end());
            for (std::size_t j : selected) {
                if (sums[j] > 0.0) {
                    out.active_set.push_back(j);
                    out.intensities.push_back(sums[j]);
                }
            }
        }
    });
    return cs;
}

struct IterationStats {
    std::size_t iter = 0;
    std::size_t reassigned = 0;
    double precision = 0.0;
};

/// Snapshot handed to the observer once per iteration: the codebook the
/// assignment was computed against, plus which clusters were reseeded while
/// producing that codebook (always empty for the initial one).
struct IterationView {
    std::size_t iter;
    const CentroidSet& codebook;
    const Assignment& assignment;
    std::size_t reassigned;
    double precision;
    const std::vector<std::uint32_t>& reseeded_clusters;
};

using IterationObserver = std::function<void(const IterationView&)>;

struct ClusterResult {
    CentroidSet codebook;
    Assignment assignment;
    MetricsReport report;
    std::vector<IterationStats> trace;
};

namespace detail {

/// Replaces each empty centroid with the single-row update of the row
/// currently farthest from its own assigned centroid (ties to the lower
/// row), using successive distinct rows when several clusters are empty.
inline std::vector<std::uint32_t> reseed_empty_clusters(const PatternMatrix& data,
                                                        const BinarySupportMatrix& bits,
                                                        const Assignment& assignment,
                                                        CentroidSet& codebook) {
    std::vector<std::uint32_t> empties;
    for (std::size_t c = 0; c < assignment.k(); ++c) {
        if (assignment.sizes[c] == 0) {
            empties.push_back(static_cast<std::uint32_t>(c));
        }
    }
    if (empties.empty()) {
        return empties;
    }

    AssignProblem p(bits, codebook);
    const std::size_t n = bits.n_rows();
    std::vector<std::uint32_t> overlap(n);
    for (std::size_t i = 0; i < n; ++i) {
        overlap[i] = p.overlap(i, assignment.cluster_of[i]);
    }
    std::vector<std::uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::uint32_t{0});
    const std::size_t take = empties.size(); // <= k <= n
    std::partial_sort(rows.begin(), rows.begin() + take, rows.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          // farthest first: larger distance = smaller o/s
                          const std::uint64_t lhs =
                              std::uint64_t{overlap[a]} * p.row_support[b];
                          const std::uint64_t rhs =
                              std::uint64_t{overlap[b]} * p.row_support[a];
                          if (lhs != rhs) {
                              return lhs < rhs;
                          }
                          return a < b;
                      });
    for (std::size_t e = 0; e < empties.size(); ++e) {
        codebook.centroids[empties[e]] =
            single_row_centroid(data.row(rows[e]), codebook.density_p);
    }
    return empties;
}

} // namespace detail

/// Activation-aware clustering: seeded row sampling, capacity-balanced greedy
/// assignment, feature-sum percentile updates, iterated until the reassigned
/// fraction drops below the threshold or max_iters is hit.
inline ClusterResult cluster_awc(const PatternMatrix& data, const ClusteringConfig& config,
                                 const IterationObserver& observer = {}) {
    config.validate(data.n_rows());
    if (data.n_rows() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidConfigError("n_rows exceeds the supported row-index range");
    }
    const std::size_t n = data.n_rows();
    const std::size_t capacity = config.effective_capacity(n);
    const BinarySupportMatrix bits = BinarySupportMatrix::from_pattern(data);

    CentroidSet codebook = init_centroids(data, config.k, config.density_p, config.seed);
    std::vector<std::uint32_t> reseeded;
    std::vector<std::uint32_t> prev_labels;
    ClusterResult result;

    for (std::size_t t = 1; t <= config.max_iters; ++t) {
        detail::AssignProblem p(bits, codebook);
        Assignment assignment =
            config.balanced
                ? detail::balanced_assign_impl(p, capacity, config.threads,
                                               config.candidate_buffer)
                : detail::nearest_assign_impl(p, config.threads);

        std::size_t reassigned = n;
        if (!prev_labels.empty()) {
            reassigned = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assignment.cluster_of[i] != prev_labels[i]) {
                    ++reassigned;
                }
            }
        }
        const double precision = build_report(bits, codebook, assignment,
                                              config.threads).precision;
        result.trace.push_back({t, reassigned, precision});
        if (observer) {
            observer({t, codebook, assignment, reassigned, precision, reseeded});
        }

        const bool converged =
            static_cast<double>(reassigned) / static_cast<double>(n) <
            config.min_reassigned_fraction;
        if (converged || t == config.max_iters) {
            result.codebook = std::move(codebook);
            result.assignment = std::move(assignment);
            break;
        }

        prev_labels = assignment.cluster_of;
        codebook = update_centroids(data, assignment, config.density_p, config.threads);
        reseeded = detail::reseed_empty_clusters(data, bits, assignment, codebook);
    }

    result.report = build_report(bits, result.codebook, result.assignment, config.threads);
    return result;
}

inline void trace_csv(std::ostream& out, const std::vector<IterationStats>& trace) {
    out << "iter,reassigned,precision\n";
    for (const IterationStats& s : trace) {
        out << s.iter << ',' << s.reassigned << ',' << format_double(s.precision) << '\n';
    }
}

} // namespace apc
