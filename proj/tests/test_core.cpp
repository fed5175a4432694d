#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include <apc/apc.hpp>

#include "test_support.hpp"

using Catch::Approx;

TEST_CASE("pattern matrix validates construction", "[pattern]") {
    REQUIRE_NOTHROW(apc::PatternMatrix(2, 3, {0, 1, 2, 3, 4, 5}));
    REQUIRE_THROWS_AS(apc::PatternMatrix(0, 3, {}), apc::InvalidConfigError);
    REQUIRE_THROWS_AS(apc::PatternMatrix(2, 0, {}), apc::InvalidConfigError);
    REQUIRE_THROWS_AS(apc::PatternMatrix(1, 2, {1.0}), apc::DimensionError);
    REQUIRE_THROWS_AS(apc::PatternMatrix(1, 2, {1.0, -0.5}), apc::DomainError);
    REQUIRE_THROWS_AS(
        apc::PatternMatrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}),
        apc::DomainError);
    REQUIRE_THROWS_AS(
        apc::PatternMatrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}),
        apc::DomainError);

    apc::PatternMatrix m(2, 2, {0.0, 1.5, 2.5, 0.0});
    REQUIRE(m.at(0, 1) == 1.5);
    REQUIRE_THROWS_AS(m.at(2, 0), apc::IndexError);
    REQUIRE_THROWS_AS(m.at(0, 2), apc::IndexError);
    REQUIRE_THROWS_AS(
        apc::PatternMatrix::from_rows({{1.0, 2.0}, {3.0}}), apc::DimensionError);
}

TEST_CASE("magnitude threshold keeps the largest magnitudes", "[pattern]") {
    SECTION("mixed signs") {
        const std::vector<double> raw = {0.9, -0.1, 0.5, 0.05};
        const apc::PatternMatrix out =
            apc::apply_magnitude_threshold(1, 4, raw, 0.5);
        REQUIRE(out.at(0, 0) == 0.9);
        REQUIRE(out.at(0, 1) == 0.0);
        REQUIRE(out.at(0, 2) == 0.5);
        REQUIRE(out.at(0, 3) == 0.0);
    }
    SECTION("sparsity zero keeps magnitudes unchanged") {
        const std::vector<double> raw = {0.3, -0.7, 0.0, 2.0};
        const apc::PatternMatrix out =
            apc::apply_magnitude_threshold(1, 4, raw, 0.0);
        REQUIRE(out.at(0, 0) == 0.3);
        REQUIRE(out.at(0, 1) == 0.7);
        REQUIRE(out.at(0, 2) == 0.0);
        REQUIRE(out.at(0, 3) == 2.0);
    }
    SECTION("magnitude ties zero the lower index first") {
        const std::vector<double> raw = {0.2, 0.2, 0.2, 0.2};
        const apc::PatternMatrix out =
            apc::apply_magnitude_threshold(1, 4, raw, 0.5);
        REQUIRE(out.at(0, 0) == 0.0);
        REQUIRE(out.at(0, 1) == 0.0);
        REQUIRE(out.at(0, 2) == 0.2);
        REQUIRE(out.at(0, 3) == 0.2);
    }
    SECTION("exact zeros are consumed by the budget first") {
        const std::vector<double> raw = {0.0, 5.0, 3.0, 0.0};
        const apc::PatternMatrix out =
            apc::apply_magnitude_threshold(1, 4, raw, 0.5);
        REQUIRE(out.at(0, 1) == 5.0);
        REQUIRE(out.at(0, 2) == 3.0);
        REQUIRE(out.at(0, 0) == 0.0);
        REQUIRE(out.at(0, 3) == 0.0);
    }
    SECTION("every row ends with the same nonzero count") {
        apc::SplitMix64 rng(41);
        const std::size_t rows = 17, cols = 37;
        std::vector<double> raw(rows * cols);
        for (double& v : raw) v = (rng.real01() - 0.5) * 4.0 + 1e-9;
        const double s = 0.4;
        const apc::PatternMatrix out =
            apc::apply_magnitude_threshold(rows, cols, raw, s);
        const std::size_t expect =
            cols - static_cast<std::size_t>(std::floor(s * cols));
        for (std::size_t i = 0; i < rows; ++i) {
            std::size_t nz = 0;
            for (std::size_t j = 0; j < cols; ++j)
                if (out.at(i, j) != 0.0) ++nz;
            REQUIRE(nz == expect);
        }
    }
    SECTION("invalid arguments") {
        const std::vector<double> ok = {1.0, 2.0};
        REQUIRE_THROWS_AS(apc::apply_magnitude_threshold(1, 2, ok, 1.0),
                          apc::InvalidConfigError);
        REQUIRE_THROWS_AS(apc::apply_magnitude_threshold(1, 2, ok, -0.1),
                          apc::InvalidConfigError);
        const std::vector<double> bad = {1.0,
                                         std::numeric_limits<double>::quiet_NaN()};
        REQUIRE_THROWS_AS(apc::apply_magnitude_threshold(1, 2, bad, 0.5),
                          apc::DomainError);
    }
}

TEST_CASE("binary support matrix packs bits", "[pattern]") {
    apc::BinarySupportMatrix m(3, 70);
    REQUIRE(m.words_per_row() == 2);
    m.set_bit(0, 0);
    m.set_bit(0, 69);
    m.set_bit(2, 64);
    REQUIRE(m.get(0, 0));
    REQUIRE(m.get(0, 69));
    REQUIRE_FALSE(m.get(0, 68));
    REQUIRE(m.row_popcount(0) == 2);
    REQUIRE(m.row_popcount(1) == 0);
    REQUIRE(m.total_popcount() == 3);

    apc::PatternMatrix p(2, 3, {0.0, 1.2, 0.0, 0.4, 0.0, 0.0});
    const apc::BinarySupportMatrix b = apc::BinarySupportMatrix::from_pattern(p);
    REQUIRE(b.get(0, 1));
    REQUIRE_FALSE(b.get(0, 0));
    REQUIRE(b.get(1, 0));
    REQUIRE(b.total_popcount() == 2);

    REQUIRE(apc::support_of(p, 0) == std::vector<std::size_t>{1});
    REQUIRE(apc::support_of(p, 1) == std::vector<std::size_t>{0});
    REQUIRE_THROWS_AS(apc::support_of(p, 2), apc::IndexError);

    const apc::PatternMatrix back = apc::expand_to_pattern(b);
    REQUIRE(apc::BinarySupportMatrix::from_pattern(back) == b);
}

TEST_CASE("precision counts covered active elements", "[metrics]") {
    apc::BinarySupportMatrix a(1, 4);
    a.set_bit(0, 0);
    a.set_bit(0, 1);
    apc::BinarySupportMatrix c(1, 4);
    c.set_bit(0, 0);
    c.set_bit(0, 2);
    REQUIRE(apc::clustering_precision(a, c) == 0.5);
    REQUIRE(apc::clustering_error(a, c) == 2);
    REQUIRE(apc::clustering_precision(a, a) == 1.0);
    REQUIRE(apc::clustering_error(a, a) == 0);

    apc::BinarySupportMatrix none(1, 4);
    REQUIRE(apc::clustering_precision(a, none) == 0.0);
    REQUIRE_THROWS_AS(apc::clustering_precision(none, a),
                      apc::UndefinedMetricError);

    apc::BinarySupportMatrix full(1, 4);
    for (std::size_t j = 0; j < 4; ++j) full.set_bit(0, j);
    REQUIRE(apc::clustering_error(none, full) == 4);

    apc::BinarySupportMatrix wide(1, 5);
    REQUIRE_THROWS_AS(apc::clustering_precision(a, wide), apc::DimensionError);
    apc::BinarySupportMatrix tall(2, 4);
    tall.set_bit(0, 0);
    REQUIRE_THROWS_AS(apc::clustering_error(a, tall), apc::DimensionError);
}

TEST_CASE("element accuracy ratio", "[metrics]") {
    REQUIRE(apc::element_accuracy(939524096, 275938227) == Approx(0.7063).margin(2e-4));
    REQUIRE(apc::element_accuracy(939524096, 368293446) == Approx(0.6080).margin(2e-4));
    REQUIRE(apc::element_accuracy(268435456, 137573172) == Approx(0.4875).margin(2e-4));
    REQUIRE(apc::element_accuracy(10, 0) == 1.0);
    REQUIRE_THROWS_AS(apc::element_accuracy(0, 0), apc::DomainError);
    REQUIRE_THROWS_AS(apc::element_accuracy(5, 6), apc::DomainError);
}

TEST_CASE("metrics agree with the reference loops", "[metrics]") {
    apc::SplitMix64 rng(1234);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        const std::size_t d = 1 + rng.below(130);
        const auto a = support::random_bits(n, d, 0.05 + 0.5 * rng.real01(), rng);
        const auto c = support::random_bits(n, d, 0.05 + 0.5 * rng.real01(), rng);
        if (a.total_popcount() == 0) continue;
        REQUIRE(apc::clustering_precision(a, c) == support::naive_precision(a, c));
        REQUIRE(apc::clustering_error(a, c) == support::naive_error(a, c));
        REQUIRE(apc::clustering_precision(a, c, 4) == apc::clustering_precision(a, c));
        REQUIRE(apc::clustering_error(a, c, 4) == apc::clustering_error(a, c));
    }
}

TEST_CASE("precision is one exactly when assignments cover supports", "[metrics]") {
    apc::SplitMix64 rng(77);
    const auto a = support::random_bits(25, 90, 0.3, rng);
    apc::BinarySupportMatrix c = a;
    for (std::size_t i = 0; i < c.n_rows(); ++i)
        for (std::size_t j = 0; j < c.n_cols(); ++j)
            if (rng.real01() < 0.2) c.set_bit(i, j);
    REQUIRE(apc::clustering_precision(a, c) == 1.0);

    apc::BinarySupportMatrix missing = c;
    std::size_t ri = 0, rj = 0;
    bool found = false;
    for (std::size_t i = 0; i < a.n_rows() && !found; ++i)
        for (std::size_t j = 0; j < a.n_cols() && !found; ++j)
            if (a.get(i, j)) {
                ri = i;
                rj = j;
                found = true;
            }
    REQUIRE(found);
    missing.row_words_mut(ri)[rj / 64] &= ~(std::uint64_t{1} << (rj % 64));
    REQUIRE(apc::clustering_precision(a, missing) < 1.0);
}

TEST_CASE("precision is invariant under row permutation", "[metrics]") {
    apc::SplitMix64 rng(99);
    const std::size_t n = 30, d = 64;
    const auto a = support::random_bits(n, d, 0.4, rng);
    const auto c = support::random_bits(n, d, 0.4, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.below(i)]);
    apc::BinarySupportMatrix pa(n, d), pc(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (a.get(perm[i], j)) pa.set_bit(i, j);
            if (c.get(perm[i], j)) pc.set_bit(i, j);
        }
    REQUIRE(apc::clustering_precision(a, c) == apc::clustering_precision(pa, pc));
    REQUIRE(apc::clustering_error(a, c) == apc::clustering_error(pa, pc));
}

TEST_CASE("report assembles every field from one pass", "[metrics]") {
    SECTION("single centroid covering identical rows") {
        apc::BinarySupportMatrix data(3, 6);
        for (std::size_t i = 0; i < 3; ++i) {
            data.set_bit(i, 1);
            data.set_bit(i, 4);
        }
        apc::CentroidSet cs;
        cs.dim = 6;
        cs.density_p = 0.0;
        cs.centroids.push_back({{1, 4}, {1.0, 1.0}, 0.0});
        const apc::Assignment asg = apc::make_assignment(1, {0, 0, 0});
        const apc::MetricsReport r = apc::build_report(data, cs, asg);
        REQUIRE(r.precision == 1.0);
        REQUIRE(r.error_count == 0);
        REQUIRE(r.element_accuracy == 1.0);
        REQUIRE(r.total_elements == 18);
        REQUIRE(r.total_active == 6);
        REQUIRE(r.cluster_sizes == std::vector<std::uint64_t>{3});
    }
    SECTION("matches reference computation on random instances") {
        apc::SplitMix64 rng(2024);
        for (int trial = 0; trial < 12; ++trial) {
            const std::size_t n = 2 + rng.below(50);
            const std::size_t d = 2 + rng.below(100);
            const std::size_t k = 1 + rng.below(5);
            const auto data = support::random_bits(n, d, 0.35, rng);
            if (data.total_popcount() == 0) continue;
            const auto cs = support::random_codebook(k, d, 0.3, rng);
            std::vector<std::uint32_t> labels(n);
            for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(k));
            const apc::Assignment asg =
                apc::make_assignment(k, std::vector<std::uint32_t>(labels));
            const apc::MetricsReport r = apc::build_report(data, cs, asg, 3);
            const auto expanded = support::naive_expand(cs, labels);
            REQUIRE(r.precision == support::naive_precision(data, expanded));
            REQUIRE(r.error_count == support::naive_error(data, expanded));
            REQUIRE(r.total_elements == static_cast<std::uint64_t>(n) * d);
            REQUIRE(r.total_active == data.total_popcount());
            REQUIRE(r.element_accuracy ==
                    apc::element_accuracy(r.total_elements, r.error_count));
            std::vector<std::uint64_t> sizes(k, 0);
            for (const auto l : labels) ++sizes[l];
            REQUIRE(r.cluster_sizes == sizes);
        }
    }
    SECTION("shape and label validation") {
        apc::BinarySupportMatrix data(2, 4);
        data.set_bit(0, 0);
        apc::CentroidSet cs;
        cs.dim = 5;
        cs.centroids.push_back({{0}, {1.0}, 0.0});
        const apc::Assignment asg = apc::make_assignment(1, {0, 0});
        REQUIRE_THROWS_AS(apc::build_report(data, cs, asg), apc::DimensionError);
        cs.dim = 4;
        const apc::Assignment bad = apc::make_assignment(2, {0, 1});
        REQUIRE_THROWS_AS(apc::build_report(data, cs, bad), apc::DimensionError);
    }
}

TEST_CASE("report serialization is stable", "[metrics]") {
    apc::MetricsReport r;
    r.k = 4;
    r.density_p = 0.25;
    r.precision = 0.875;
    r.error_count = 10;
    r.total_elements = 80;
    r.element_accuracy = 0.875;
    r.total_active = 16;
    r.cluster_sizes = {3, 1, 0, 4};
    REQUIRE(apc::report_csv_header() ==
            "k,density_p,precision,error_count,total_elements,element_accuracy,"
            "total_active");
    REQUIRE(apc::report_csv_row(r) == "4,0.25,0.875,10,80,0.875,16");
    const auto j = apc::report_to_json(r);
    REQUIRE(j.dump() ==
            "{\"k\":4,\"density_p\":0.25,\"precision\":0.875,\"error_count\":10,"
            "\"total_elements\":80,\"element_accuracy\":0.875,\"total_active\":16,"
            "\"cluster_sizes\":[3,1,0,4]}");
}

TEST_CASE("cost model reproduces the reference configuration", "[costmodel]") {
    const apc::CostModelParams p;
    REQUIRE(apc::round_significant(apc::ffn_neuron_count(p), 3) == 4.67e9);
    REQUIRE(apc::total_clusters(p) == 6144);
    REQUIRE(apc::round_significant(apc::direct_cost(p), 3) == 3.06e14);
    REQUIRE(apc::round_significant(apc::clustered_cost(p), 3) == 4.03e8);
    const double gain = apc::efficiency_gain(p);
    REQUIRE(std::abs(gain - 7.6e5) / 7.6e5 <= 0.005);
}

TEST_CASE("cost model identities", "[costmodel]") {
    SECTION("neuron count is a plain product") {
        apc::CostModelParams p;
        p.total_params = 3'000'000'000ULL;
        p.ffn_fraction = 1.0 / 3.0;
        REQUIRE(apc::ffn_neuron_count(p) == Approx(1e9).epsilon(1e-12));
        p.ffn_fraction = 1.0;
        REQUIRE(apc::ffn_neuron_count(p) == 3e9);
    }
    SECTION("unit costs collapse to the population sizes") {
        apc::CostModelParams p;
        p.layers_L = 1;
        p.tokens_T = 1;
        p.per_neuron_cost_C = 1.0;
        REQUIRE(apc::direct_cost(p) == apc::ffn_neuron_count(p));
        REQUIRE(apc::clustered_cost(p) ==
                static_cast<double>(apc::total_clusters(p)));
    }
    SECTION("direct cost scales linearly in tokens") {
        apc::CostModelParams p;
        const double base = apc::direct_cost(p);
        p.tokens_T *= 2;
        REQUIRE(apc::direct_cost(p) == 2.0 * base);
    }
    SECTION("gain ignores layers tokens and unit cost") {
        apc::SplitMix64 rng(5150);
        apc::CostModelParams p;
        const double base = apc::efficiency_gain(p);
        for (int t = 0; t < 20; ++t) {
            apc::CostModelParams q;
            q.layers_L = 1 + rng.below(100);
            q.tokens_T = 1 + rng.below(100000);
            q.per_neuron_cost_C = 0.25 + rng.real01() * 8;
            REQUIRE(apc::efficiency_gain(q) == base);
        }
    }
    SECTION("gain is the cost ratio") {
        apc::CostModelParams p;
        p.layers_L = 7;
        p.tokens_T = 129;
        p.per_neuron_cost_C = 0.5;
        REQUIRE(apc::efficiency_gain(p) ==
                Approx(apc::direct_cost(p) / apc::clustered_cost(p)).epsilon(1e-12));
    }
    SECTION("gain is one when clusters equal neurons") {
        apc::CostModelParams p;
        p.total_params = 6144;
        p.ffn_fraction = 1.0;
        REQUIRE(apc::efficiency_gain(p) == 1.0);
    }
    SECTION("halving the cluster count doubles the gain") {
        apc::CostModelParams p;
        const double base = apc::efficiency_gain(p);
        p.clusters_per_sublayer /= 2;
        REQUIRE(apc::efficiency_gain(p) == 2.0 * base);
    }
}

TEST_CASE("cost model rejects degenerate parameters", "[costmodel]") {
    apc::CostModelParams p;
    p.ffn_fraction = 0.0;
    REQUIRE_THROWS_AS(apc::efficiency_gain(p), apc::InvalidConfigError);
    p = {};
    p.ffn_fraction = 1.5;
    REQUIRE_THROWS_AS(apc::efficiency_gain(p), apc::InvalidConfigError);
    p = {};
    p.total_params = 0;
    REQUIRE_THROWS_AS(apc::direct_cost(p), apc::InvalidConfigError);
    p = {};
    p.clusters_per_sublayer = 0;
    REQUIRE_THROWS_AS(apc::clustered_cost(p), apc::InvalidConfigError);
    p = {};
    p.per_neuron_cost_C = -1.0;
    REQUIRE_THROWS_AS(apc::direct_cost(p), apc::InvalidConfigError);
    p = {};
    p.per_neuron_cost_C = 1e308;
    p.tokens_T = 1'000'000'000ULL;
    REQUIRE_THROWS_AS(apc::direct_cost(p), apc::OverflowError);
}
