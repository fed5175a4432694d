// Batch front end: generate synthetic data, cluster it, evaluate codebooks,
// sweep parameter grids, and print the cost model.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apc/apc.hpp"

namespace {

unsigned resolve_threads(unsigned flag_value) {
    const char* env = std::getenv("APC_THREADS");
    if (env != nullptr && *env != '\0') {
        std::uint64_t v = 0;
        try {
            v = apc::parse_u64(env, "APC_THREADS");
        } catch (const apc::DomainError& e) {
            throw apc::InvalidConfigError(e.what());
        }
        if (v == 0 || v > 1024) {
            throw apc::InvalidConfigError("APC_THREADS must lie in [1, 1024]");
        }
        return static_cast<unsigned>(v);
    }
    return flag_value;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw apc::Error("cannot open '" + path + "' for writing");
    }
    return out;
}

nlohmann::ordered_json tagged_report(const std::string& algorithm,
                                     const apc::MetricsReport& report) {
    nlohmann::ordered_json j;
    j["algorithm"] = algorithm;
    const nlohmann::ordered_json fields = apc::report_to_json(report);
    for (const auto& [key, value] : fields.items()) {
        j[key] = value;
    }
    return j;
}

struct GenerateOpts {
    apc::SyntheticSpec spec;
    std::string out;
    unsigned threads = 1;
};

int run_generate(const GenerateOpts& o) {
    const unsigned threads = resolve_threads(o.threads);
    const apc::SyntheticData synth = apc::generate_synthetic(o.spec, threads);

    apc::write_real_matrix(synth.data, o.out + ".apcf");
    apc::write_codebook(synth.prototypes, o.out + ".protos.apcc");

    apc::DatasetManifest manifest;
    manifest.sublayer_label = "synthetic";
    manifest.dim = o.spec.dim;
    manifest.n_rows = o.spec.n_rows;
    std::string densities;
    if (o.spec.proto_densities.empty()) {
        densities = apc::format_double(o.spec.proto_density);
    } else {
        for (std::size_t i = 0; i < o.spec.proto_densities.size(); ++i) {
            if (i != 0) {
                densities += '/';
            }
            densities += apc::format_double(o.spec.proto_densities[i]);
        }
    }
    manifest.source = "planted prototypes: n=" + std::to_string(o.spec.n_prototypes) +
                      " density=" + densities +
                      " flip_noise=" + apc::format_double(o.spec.flip_noise) +
                      " seed=" + std::to_string(o.spec.seed);
    apc::write_manifest(manifest, o.out + ".manifest.json");

    std::cerr << "wrote " << o.out << ".apcf, " << o.out << ".protos.apcc, " << o.out
              << ".manifest.json\n";
    return 0;
}

struct ClusterOpts {
    std::string input;
    std::string algorithm;
    std::size_t k = 0;
    double density_p = 0.6;
    std::size_t capacity = 0;
    std::size_t max_iters = 50;
    double min_reassigned_fraction = 0.001;
    std::uint64_t seed = 1;
    bool unbalanced = false;
    std::size_t candidates = 32;
    unsigned threads = 1;
    std::string out;
    std::string trace_path;
};

void write_trace(const std::string& path, const std::vector<apc::IterationStats>& trace) {
    auto out = open_out(path);
    apc::trace_csv(out, trace);
}

std::vector<apc::IterationStats> strip_objective(
    const std::vector<apc::BaselineIterationStats>& trace) {
    std::vector<apc::IterationStats> out;
    out.reserve(trace.size());
    for (const auto& s : trace) {
        out.push_back({s.iter, s.reassigned, s.precision});
    }
    return out;
}

int run_cluster(const ClusterOpts& o) {
    const unsigned threads = resolve_threads(o.threads);
    const apc::PatternMatrix data = apc::read_pattern_auto(o.input);

    apc::CentroidSet codebook;
    apc::MetricsReport report;
    std::vector<apc::IterationStats> trace;
    if (o.algorithm == "awc") {
        apc::ClusteringConfig cfg;
        cfg.k = o.k;
        cfg.density_p = o.density_p;
        cfg.capacity = o.capacity;
        cfg.max_iters = o.max_iters;
        cfg.min_reassigned_fraction = o.min_reassigned_fraction;
        cfg.seed = o.seed;
        cfg.balanced = !o.unbalanced;
        cfg.candidate_buffer = o.candidates;
        cfg.threads = threads;
        apc::ClusterResult result = apc::cluster_awc(data, cfg);
        codebook = std::move(result.codebook);
        report = std::move(result.report);
        trace = std::move(result.trace);
    } else {
        apc::BaselineConfig cfg;
        cfg.k = o.k;
        cfg.max_iters = o.max_iters;
        cfg.seed = o.seed;
        cfg.threads = threads;
        apc::BaselineResult result = o.algorithm == "bmf"
                                         ? apc::cluster_bmf(data, cfg)
                                         : apc::cluster_brb_kmeans(data, cfg);
        codebook = std::move(result.codebook);
        report = std::move(result.report);
        trace = strip_objective(result.trace);
    }

    apc::write_codebook(codebook, o.out + ".apcc");
    {
        auto out = open_out(o.out + ".report.json");
        out << tagged_report(o.algorithm, report).dump(2) << '\n';
    }
    if (!o.trace_path.empty()) {
        write_trace(o.trace_path, trace);
    }
    std::cerr << "wrote " << o.out << ".apcc, " << o.out << ".report.json\n";
    return 0;
}

struct EvalOpts {
    std::string input;
    std::string codebook;
    std::string distance = "overlap";
    unsigned threads = 1;
    std::string out;
};

int run_eval(const EvalOpts& o) {
    const unsigned threads = resolve_threads(o.threads);
    const apc::PatternMatrix data = apc::read_pattern_auto(o.input);
    const apc::BinarySupportMatrix bits = apc::BinarySupportMatrix::from_pattern(data);
    const apc::CentroidSet codebook = apc::read_codebook(o.codebook);

    const apc::Assignment assignment = o.distance == "overlap"
                                           ? apc::nearest_assign(bits, codebook, threads)
                                           : apc::nearest_assign_hamming(bits, codebook,
                                                                         threads);
    const apc::MetricsReport report = apc::build_report(bits, codebook, assignment, threads);

    nlohmann::ordered_json j;
    j["distance"] = o.distance;
    const nlohmann::ordered_json fields = apc::report_to_json(report);
    for (const auto& [key, value] : fields.items()) {
        j[key] = value;
    }
    if (o.out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        auto out = open_out(o.out);
        out << j.dump(2) << '\n';
    }
    return 0;
}

struct SweepOpts {
    std::string input;
    std::vector<std::size_t> k_values;
    std::vector<double> density_values{0.6};
    std::vector<std::string> algorithms{"awc", "bmf", "brbk"};
    std::vector<std::uint64_t> seeds{1};
    std::size_t max_iters = 50;
    double min_reassigned_fraction = 0.001;
    std::size_t candidates = 32;
    unsigned threads = 1;
    std::string out;
    std::string save_codebooks;
};

struct CellOutcome {
    bool ok = false;
    apc::MetricsReport report;
    apc::CentroidSet codebook;
    std::string error;
};

CellOutcome run_cell(const apc::PatternMatrix& data, const std::string& algorithm,
                     std::size_t k, double density, std::uint64_t seed,
                     const SweepOpts& o, unsigned threads) {
    CellOutcome cell;
    try {
        if (algorithm == "awc") {
            apc::ClusteringConfig cfg;
            cfg.k = k;
            cfg.density_p = density;
            cfg.max_iters = o.max_iters;
            cfg.min_reassigned_fraction = o.min_reassigned_fraction;
            cfg.seed = seed;
            cfg.candidate_buffer = o.candidates;
            cfg.threads = threads;
            apc::ClusterResult r = apc::cluster_awc(data, cfg);
            cell.report = std::move(r.report);
            cell.codebook = std::move(r.codebook);
        } else {
            apc::BaselineConfig cfg;
            cfg.k = k;
            cfg.max_iters = o.max_iters;
            cfg.seed = seed;
            cfg.threads = threads;
            apc::BaselineResult r = algorithm == "bmf" ? apc::cluster_bmf(data, cfg)
                                                       : apc::cluster_brb_kmeans(data, cfg);
            cell.report = std::move(r.report);
            cell.codebook = std::move(r.codebook);
        }
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.error = e.what();
    }
    return cell;
}

std::string csv_escape(const std::string& s) {
    std::string out;
    bool quote = false;
    for (char c : s) {
        if (c == ',' || c == '"' || c == '\n') {
            quote = true;
        }
    }
    if (!quote) {
        return s;
    }
    out += '"';
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

int run_sweep(const SweepOpts& o) {
    const unsigned threads = resolve_threads(o.threads);
    const apc::PatternMatrix data = apc::read_pattern_auto(o.input);

    for (std::size_t k : o.k_values) {
        if (k == 0 || k > data.n_rows()) {
            throw apc::InvalidConfigError("k = " + std::to_string(k) +
                                          " exceeds n_rows = " +
                                          std::to_string(data.n_rows()));
        }
    }
    for (double d : o.density_values) {
        if (!(d > 0.0 && d <= 1.0)) {
            throw apc::InvalidConfigError("density_p must lie in (0, 1]");
        }
    }
    for (const std::string& a : o.algorithms) {
        if (a != "awc" && a != "bmf" && a != "brbk") {
            throw apc::InvalidConfigError("unknown algorithm '" + a + "'");
        }
    }
    if (!o.save_codebooks.empty()) {
        std::filesystem::create_directories(o.save_codebooks);
    }

    auto out = open_out(o.out);
    auto timings = open_out(o.out + ".timings.csv");
    out << "algorithm,seed," << apc::report_csv_header() << ",error\n";
    timings << "algorithm,seed,k,density_p,wall_seconds\n";

    bool any_failed = false;
    for (const std::string& algorithm : o.algorithms) {
        for (std::size_t k : o.k_values) {
            for (double density : o.density_values) {
                for (std::uint64_t seed : o.seeds) {
                    const auto start = std::chrono::steady_clock::now();
                    CellOutcome cell = run_cell(data, algorithm, k, density, seed, o,
                                                threads);
                    const std::chrono::duration<double> wall =
                        std::chrono::steady_clock::now() - start;

                    const std::string cell_key = algorithm + "," + std::to_string(seed) +
                                                 "," + std::to_string(k) + "," +
                                                 apc::format_double(density);
                    if (cell.ok) {
                        apc::MetricsReport row = cell.report;
                        row.k = k;
                        row.density_p = density;
                        out << algorithm << ',' << seed << ',' << apc::report_csv_row(row)
                            << ",\n";
                        if (!o.save_codebooks.empty()) {
                            const std::string name =
                                algorithm + "_k" + std::to_string(k) + "_p" +
                                apc::format_double(density) + "_s" + std::to_string(seed) +
                                ".apcc";
                            apc::write_codebook(cell.codebook,
                                                o.save_codebooks + "/" + name);
                        }
                    } else {
                        any_failed = true;
                        out << algorithm << ',' << seed << ',' << k << ','
                            << apc::format_double(density) << ",,,,,,"
                            << csv_escape(cell.error) << '\n';
                    }
                    timings << cell_key << ',' << apc::format_double(wall.count()) << '\n';
                }
            }
        }
    }
    out.flush();
    timings.flush();
    if (!out || !timings) {
        throw apc::Error("write failed while emitting sweep reports");
    }
    return any_failed ? 1 : 0;
}

struct CostOpts {
    apc::CostModelParams params;
};

int run_cost(const CostOpts& o) {
    std::cout << apc::cost_to_json(o.params).dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"clustering toolkit for sparse neuron-activation patterns"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI/TOML file");

    int exit_code = 0;

    GenerateOpts gen;
    auto* generate = app.add_subcommand("generate",
                                        "write a planted-prototype synthetic dataset");
    generate->add_option("--n-prototypes", gen.spec.n_prototypes, "planted prototype count")
        ->capture_default_str();
    generate->add_option("--dim", gen.spec.dim, "feature dimension")
        ->capture_default_str();
    generate->add_option("--n-rows", gen.spec.n_rows, "pattern count")
        ->capture_default_str();
    generate->add_option("--proto-density", gen.spec.proto_density,
                         "active fraction per prototype")
        ->capture_default_str();
    generate
        ->add_option("--proto-densities", gen.spec.proto_densities,
                     "per-prototype densities, cycled (overrides --proto-density)")
        ->delimiter(',');
    generate->add_option("--flip-noise", gen.spec.flip_noise, "per-bit flip probability")
        ->capture_default_str();
    generate->add_option("--seed", gen.spec.seed, "RNG seed")->capture_default_str();
    generate->add_option("--threads", gen.threads, "worker threads")->capture_default_str();
    generate->add_option("--out", gen.out, "output path prefix")->required();
    generate->callback([&] { exit_code = run_generate(gen); });

    ClusterOpts clu;
    auto* cluster = app.add_subcommand("cluster", "cluster a dataset and write a codebook");
    cluster->add_option("--input", clu.input, "APCF or APCB dataset")->required();
    cluster->add_option("--algorithm", clu.algorithm, "awc | bmf | brbk")
        ->required()
        ->check(CLI::IsMember({"awc", "bmf", "brbk"}));
    cluster->add_option("--k", clu.k, "cluster count")->required();
    cluster->add_option("--density-p", clu.density_p, "centroid density (awc)")
        ->capture_default_str();
    cluster->add_option("--capacity", clu.capacity,
                        "per-cluster cap, 0 = ceil(n_rows / k)")
        ->capture_default_str();
    cluster->add_option("--max-iters", clu.max_iters, "iteration cap")
        ->capture_default_str();
    cluster->add_option("--min-reassigned-fraction", clu.min_reassigned_fraction,
                        "convergence threshold (awc)")
        ->capture_default_str();
    cluster->add_option("--seed", clu.seed, "RNG seed")->capture_default_str();
    cluster->add_flag("--unbalanced", clu.unbalanced,
                      "disable the per-cluster capacity (awc)");
    cluster->add_option("--candidates", clu.candidates, "per-row candidate buffer (awc)")
        ->capture_default_str();
    cluster->add_option("--threads", clu.threads, "worker threads")->capture_default_str();
    cluster->add_option("--out", clu.out, "output path prefix")->required();
    cluster->add_option("--trace", clu.trace_path, "iteration trace CSV path");
    cluster->callback([&] { exit_code = run_cluster(clu); });

    EvalOpts ev;
    auto* eval = app.add_subcommand("eval", "evaluate a codebook on a dataset");
    eval->add_option("--input", ev.input, "APCF or APCB dataset")->required();
    eval->add_option("--codebook", ev.codebook, "APCC codebook")->required();
    eval->add_option("--distance", ev.distance, "overlap | hamming")
        ->capture_default_str()
        ->check(CLI::IsMember({"overlap", "hamming"}));
    eval->add_option("--threads", ev.threads, "worker threads")->capture_default_str();
    eval->add_option("--out", ev.out, "report JSON path (default: stdout)");
    eval->callback([&] { exit_code = run_eval(ev); });

    SweepOpts sw;
    auto* sweep = app.add_subcommand("sweep", "run a (algorithm, k, density, seed) grid");
    sweep->add_option("--input", sw.input, "APCF or APCB dataset")->required();
    sweep->add_option("--k", sw.k_values, "cluster counts")->required()->delimiter(',');
    sweep->add_option("--density-p", sw.density_values, "centroid densities (awc)")
        ->delimiter(',');
    sweep->add_option("--algorithms", sw.algorithms, "subset of awc,bmf,brbk")
        ->delimiter(',');
    sweep->add_option("--seeds", sw.seeds, "RNG seeds")->delimiter(',');
    sweep->add_option("--max-iters", sw.max_iters, "iteration cap")->capture_default_str();
    sweep->add_option("--min-reassigned-fraction", sw.min_reassigned_fraction,
                      "convergence threshold (awc)")
        ->capture_default_str();
    sweep->add_option("--candidates", sw.candidates, "per-row candidate buffer (awc)")
        ->capture_default_str();
    sweep->add_option("--threads", sw.threads, "worker threads")->capture_default_str();
    sweep->add_option("--out", sw.out, "report CSV path")->required();
    sweep->add_option("--save-codebooks", sw.save_codebooks,
                      "directory for per-cell APCC files");
    sweep->callback([&] { exit_code = run_sweep(sw); });

    SweepOpts cmp;
    auto* compare = app.add_subcommand(
        "compare", "run every algorithm at one k and density");
    std::size_t cmp_k = 0;
    double cmp_density = 0.6;
    compare->add_option("--input", cmp.input, "APCF or APCB dataset")->required();
    compare->add_option("--k", cmp_k, "cluster count")->required();
    compare->add_option("--density-p", cmp_density, "centroid density (awc)")
        ->capture_default_str();
    compare->add_option("--algorithms", cmp.algorithms, "subset of awc,bmf,brbk")
        ->delimiter(',');
    compare->add_option("--seeds", cmp.seeds, "RNG seeds")->delimiter(',');
    compare->add_option("--max-iters", cmp.max_iters, "iteration cap")
        ->capture_default_str();
    compare->add_option("--threads", cmp.threads, "worker threads")->capture_default_str();
    compare->add_option("--out", cmp.out, "report CSV path")->required();
    compare->add_option("--save-codebooks", cmp.save_codebooks,
                        "directory for per-cell APCC files");
    compare->callback([&] {
        cmp.k_values = {cmp_k};
        cmp.density_values = {cmp_density};
        exit_code = run_sweep(cmp);
    });

    CostOpts cost;
    auto* cost_cmd = app.add_subcommand("cost", "print the activation-prediction cost model");
    cost_cmd->add_option("--total-params", cost.params.total_params, "model parameter count")
        ->capture_default_str();
    cost_cmd->add_option("--ffn-fraction", cost.params.ffn_fraction,
                         "fraction of parameters in FFN layers")
        ->capture_default_str();
    cost_cmd->add_option("--layers", cost.params.layers_L, "transformer layers")
        ->capture_default_str();
    cost_cmd->add_option("--tokens", cost.params.tokens_T, "tokens per pass")
        ->capture_default_str();
    cost_cmd->add_option("--per-neuron-cost", cost.params.per_neuron_cost_C,
                         "abstract cost per neuron prediction")
        ->capture_default_str();
    cost_cmd
        ->add_option("--clusters-per-sublayer", cost.params.clusters_per_sublayer,
                     "clusters per sub-layer")
        ->capture_default_str();
    cost_cmd->add_option("--sublayers", cost.params.sublayers, "sub-layers per FFN block")
        ->capture_default_str();
    cost_cmd->callback([&] { exit_code = run_cost(cost); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    } catch (const apc::InvalidConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const apc::CapacityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const apc::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const apc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
