// Generates a small planted-prototype corpus, clusters it with all three
// algorithms, and prints how well each codebook covers the data's active
// neurons.
#include <cstdio>

#include "apc/apc.hpp"

int main() {
    apc::SyntheticSpec spec;
    spec.n_prototypes = 8;
    spec.dim = 128;
    spec.n_rows = 1000;
    spec.proto_density = 0.5;
    spec.flip_noise = 0.02;
    spec.seed = 7;
    const apc::SyntheticData synth = apc::generate_synthetic(spec);

    apc::ClusteringConfig awc_cfg;
    awc_cfg.k = 8;
    awc_cfg.density_p = 0.5;
    awc_cfg.seed = 7;
    const apc::ClusterResult awc = apc::cluster_awc(synth.data, awc_cfg);

    apc::BaselineConfig base_cfg;
    base_cfg.k = 8;
    base_cfg.seed = 7;
    const apc::BaselineResult bmf = apc::cluster_bmf(synth.data, base_cfg);
    const apc::BaselineResult brbk = apc::cluster_brb_kmeans(synth.data, base_cfg);

    std::printf("%-10s %-10s %-12s %s\n", "algorithm", "precision", "elem_acc", "iters");
    std::printf("%-10s %-10.4f %-12.4f %zu\n", "awc", awc.report.precision,
                awc.report.element_accuracy, awc.trace.size());
    std::printf("%-10s %-10.4f %-12.4f %zu\n", "bmf", bmf.report.precision,
                bmf.report.element_accuracy, bmf.trace.size());
    std::printf("%-10s %-10.4f %-12.4f %zu\n", "brbk", brbk.report.precision,
                brbk.report.element_accuracy, brbk.trace.size());

    apc::CostModelParams cost;
    std::printf("cost-model gain with defaults: %.1f\n", apc::efficiency_gain(cost));
    return 0;
}
