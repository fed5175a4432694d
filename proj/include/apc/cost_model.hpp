#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "apc/error.hpp"

namespace apc {

/// Shape of the closed-form cost comparison: predicting every FFN neuron
/// directly versus predicting one activation pattern per cluster.
struct CostModelParams {
    std::uint64_t total_params = 7'000'000'000ULL;
    double ffn_fraction = 2.0 / 3.0;
    std::uint64_t layers_L = 32;
    std::uint64_t tokens_T = 2048;
    double per_neuron_cost_C = 1.0;
    std::uint64_t clusters_per_sublayer = 2048;
    std::uint64_t sublayers = 3;

    void validate() const {
        if (total_params == 0 || layers_L == 0 || tokens_T == 0 ||
            clusters_per_sublayer == 0 || sublayers == 0) {
            throw InvalidConfigError("all cost-model counts must be positive");
        }
        if (!(ffn_fraction > 0.0 && ffn_fraction <= 1.0)) {
            throw InvalidConfigError("ffn_fraction must lie in (0, 1]");
        }
        if (!(std::isfinite(per_neuron_cost_C) && per_neuron_cost_C > 0.0)) {
            throw InvalidConfigError("per_neuron_cost_C must be positive and finite");
        }
    }
};

inline double round_significant(double v, int digits) {
    if (v == 0.0) {
        return 0.0;
    }
    const int e = digits - 1 - static_cast<int>(std::floor(std::log10(std::fabs(v))));
    if (e >= 0) {
        const double s = std::pow(10.0, e);
        return std::round(v * s) / s;
    }
    const double s = std::pow(10.0, -e);
    return std::round(v / s) * s;
}

/// Neurons across all FFN sub-layers: total_params * ffn_fraction.
inline double ffn_neuron_count(const CostModelParams& p) {
    p.validate();
    return static_cast<double>(p.total_params) * p.ffn_fraction;
}

inline std::uint64_t total_clusters(const CostModelParams& p) {
    p.validate();
    return p.clusters_per_sublayer * p.sublayers;
}

inline double direct_cost(const CostModelParams& p) {
    const double cost = ffn_neuron_count(p) * static_cast<double>(p.layers_L) *
                        static_cast<double>(p.tokens_T) * p.per_neuron_cost_C;
    if (!std::isfinite(cost)) {
        throw OverflowError("direct cost overflows double precision");
    }
    return cost;
}

inline double clustered_cost(const CostModelParams& p) {
    const double cost = static_cast<double>(total_clusters(p)) *
                        static_cast<double>(p.layers_L) * static_cast<double>(p.tokens_T) *
                        p.per_neuron_cost_C;
    if (!std::isfinite(cost)) {
        throw OverflowError("clustered cost overflows double precision");
    }
    return cost;
}

/// direct_cost / clustered_cost with the shared L, T, C factors cancelled
/// symbolically, so the ratio is exactly ffn_neuron_count / total_clusters.
inline double efficiency_gain(const CostModelParams& p) {
    return ffn_neuron_count(p) / static_cast<double>(total_clusters(p));
}

inline nlohmann::ordered_json cost_to_json(const CostModelParams& p) {
    nlohmann::ordered_json j;
    j["n_ffn"] = ffn_neuron_count(p);
    j["n_ffn_3sf"] = round_significant(ffn_neuron_count(p), 3);
    j["k"] = total_clusters(p);
    j["direct"] = direct_cost(p);
    j["clustered"] = clustered_cost(p);
    j["gain"] = efficiency_gain(p);
    return j;
}

} // namespace apc
