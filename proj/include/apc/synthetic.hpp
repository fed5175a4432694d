#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "apc/clustering_types.hpp"
#include "apc/error.hpp"
#include "apc/parallel.hpp"
#include "apc/pattern_matrix.hpp"
#include "apc/rng.hpp"

namespace apc {

inline constexpr std::uint64_t kSynthProtoStream = 0x53A0;
inline constexpr std::uint64_t kSynthRowStream = 0x53A1;

/// Planted-prototype corpus: rows are noisy copies of a known set of
/// prototype supports, giving a ground-truth clustering. proto_densities,
/// when non-empty, assigns prototype t the density at index t mod size
/// (used for mixed-density corpora); otherwise proto_density applies to all.
struct SyntheticSpec {
    std::size_t n_prototypes = 32;
    std::size_t dim = 512;
    std::size_t n_rows = 10'000;
    double proto_density = 0.5;
    std::vector<double> proto_densities;
    double flip_noise = 0.02;
    std::uint64_t seed = 1;

    double density_for(std::size_t proto) const {
        if (proto_densities.empty()) {
            return proto_density;
        }
        return proto_densities[proto % proto_densities.size()];
    }

    void validate() const {
        if (n_prototypes == 0 || n_prototypes > n_rows) {
            throw InvalidConfigError("n_prototypes must lie in [1, n_rows]");
        }
        if (dim == 0) {
            throw InvalidConfigError("dim must be >= 1");
        }
        if (!(flip_noise >= 0.0 && flip_noise < 0.5)) {
            throw InvalidConfigError("flip_noise must lie in [0, 0.5)");
        }
        for (std::size_t t = 0; t < n_prototypes; ++t) {
            const double p = density_for(t);
            if (!(p > 0.0 && p < 1.0)) {
                throw InvalidConfigError("prototype density must lie in (0, 1)");
            }
            if (static_cast<std::size_t>(std::floor(p * static_cast<double>(dim))) == 0) {
                throw InvalidConfigError("prototype density " + std::to_string(p) +
                                         " yields an empty support at dim " +
                                         std::to_string(dim));
            }
        }
    }
};

struct SyntheticData {
    PatternMatrix data;
    Assignment planted;
    CentroidSet prototypes;
};

/// Deterministic generation: prototype t draws its support from stream
/// (seed, proto, t); row i draws flips and intensities from stream
/// (seed, row, i), so results do not depend on the thread count. Intensities
/// are uniform on (0.1, 1.0] and rounded to 32-bit floats so in-memory data
/// matches a write/read cycle through the on-disk real format exactly.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec, unsigned threads = 1) {
    spec.validate();
    const std::size_t dim = spec.dim;

    std::vector<std::vector<std::size_t>> proto_supports(spec.n_prototypes);
    CentroidSet prototypes;
    prototypes.dim = dim;
    prototypes.density_p = spec.proto_densities.empty() ? spec.proto_density : 0.0;
    prototypes.centroids.resize(spec.n_prototypes);
    for (std::size_t t = 0; t < spec.n_prototypes; ++t) {
        const auto m = static_cast<std::size_t>(
            std::floor(spec.density_for(t) * static_cast<double>(dim)));
        SplitMix64 rng(derive_stream(spec.seed, kSynthProtoStream, t));
        std::vector<std::size_t> support = sample_without_replacement(dim, m, rng);
        std::sort(support.begin(), support.end());
        Centroid& c = prototypes.centroids[t];
        c.density_p = prototypes.density_p;
        c.active_set = support;
        c.intensities.assign(m, 1.0);
        proto_supports[t] = std::move(support);
    }

    std::vector<double> values(spec.n_rows * dim, 0.0);
    parallel_for(spec.n_rows, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<char> active(dim);
        for (std::size_t i = begin; i < end; ++i) {
            const auto& support = proto_supports[i % spec.n_prototypes];
            std::fill(active.begin(), active.end(), 0);
            for (std::size_t j : support) {
                active[j] = 1;
            }
            SplitMix64 rng(derive_stream(spec.seed, kSynthRowStream, i));
            for (std::size_t j = 0; j < dim; ++j) {
                if (rng.real01() < spec.flip_noise) {
                    active[j] = !active[j];
                }
            }
            double* row = values.data() + i * dim;
            for (std::size_t j = 0; j < dim; ++j) {
                if (active[j]) {
                    row[j] = static_cast<double>(
                        static_cast<float>(1.0 - 0.9 * rng.real01()));
                }
            }
        }
    });

    std::vector<std::uint32_t> labels(spec.n_rows);
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
        labels[i] = static_cast<std::uint32_t>(i % spec.n_prototypes);
    }

    return SyntheticData{
        PatternMatrix(spec.n_rows, dim, std::move(values)),
        make_assignment(spec.n_prototypes, std::move(labels)),
        std::move(prototypes),
    };
}

} // namespace apc
