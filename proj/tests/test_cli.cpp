#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <apc/apc.hpp>

#include "test_support.hpp"

using Catch::Matchers::ContainsSubstring;
using support::run_cli;

namespace {

nlohmann::json parse_json(const std::string& text) {
    return nlohmann::json::parse(text);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (const char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

struct Fixture {
    support::TempDir dir;
    std::string prefix;

    Fixture() : prefix(dir.file("train")) {
        const auto r = run_cli({"generate", "--n-prototypes", "6", "--dim", "64",
                                "--n-rows", "240", "--proto-density", "0.3",
                                "--flip-noise", "0.05", "--seed", "11", "--out", prefix});
        REQUIRE(r.exit_code == 0);
    }

    std::string data() const { return prefix + ".apcf"; }
};

}  // namespace

TEST_CASE("usage errors exit with code 2", "[cli]") {
    REQUIRE(run_cli({}).exit_code == 2);
    REQUIRE(run_cli({"frobnicate"}).exit_code == 2);
    REQUIRE(run_cli({"cluster", "--input", "x.apcf"}).exit_code == 2);
    const auto r = run_cli({"cluster", "--input", "x.apcf", "--algorithm", "nope",
                            "--k", "2", "--out", "y"});
    REQUIRE(r.exit_code == 2);
    REQUIRE(run_cli({"--help"}).exit_code == 0);
    REQUIRE_THAT(run_cli({"sweep", "--help"}).out, ContainsSubstring("--save-codebooks"));
}

TEST_CASE("cost model subcommand prints the closed form", "[cli]") {
    const auto r = run_cli({"cost"});
    REQUIRE(r.exit_code == 0);
    const auto j = parse_json(r.out);
    REQUIRE(j["n_ffn_3sf"].get<double>() == 4.67e9);
    REQUIRE(j["k"].get<std::uint64_t>() == 6144);
    const double gain = j["gain"].get<double>();
    REQUIRE(std::abs(gain - 7.6e5) / 7.6e5 <= 0.005);

    const auto doubled = run_cli({"cost", "--clusters-per-sublayer", "1024"});
    REQUIRE(doubled.exit_code == 0);
    REQUIRE(parse_json(doubled.out)["gain"].get<double>() == 2.0 * gain);

    support::TempDir dir;
    const std::string cfg_path = dir.file("cost.ini");
    {
        std::ofstream cfg(cfg_path);
        cfg << "[cost]\nclusters-per-sublayer=1024\n";
    }
    const auto from_config = run_cli({"--config", cfg_path, "cost"});
    REQUIRE(from_config.exit_code == 0);
    REQUIRE(from_config.out == doubled.out);

    REQUIRE(run_cli({"cost", "--ffn-fraction", "0"}).exit_code == 2);
}

TEST_CASE("generate writes a reproducible bundle", "[cli]") {
    Fixture fx;
    REQUIRE(std::filesystem::exists(fx.data()));
    REQUIRE(std::filesystem::exists(fx.prefix + ".protos.apcc"));
    REQUIRE(std::filesystem::exists(fx.prefix + ".manifest.json"));

    const apc::DatasetManifest manifest = apc::read_manifest(fx.prefix + ".manifest.json");
    REQUIRE(manifest.sublayer_label == "synthetic");
    REQUIRE(manifest.dim == 64);
    REQUIRE(manifest.n_rows == 240);
    REQUIRE_THAT(manifest.source, ContainsSubstring("seed=11"));

    const std::string again = fx.dir.file("again");
    const auto r = run_cli({"generate", "--n-prototypes", "6", "--dim", "64",
                            "--n-rows", "240", "--proto-density", "0.3",
                            "--flip-noise", "0.05", "--seed", "11", "--out", again});
    REQUIRE(r.exit_code == 0);
    REQUIRE(support::read_file(fx.data()) == support::read_file(again + ".apcf"));
    REQUIRE(support::read_file(fx.prefix + ".protos.apcc") ==
            support::read_file(again + ".protos.apcc"));

    const auto bad = run_cli({"generate", "--flip-noise", "0.6", "--out",
                              fx.dir.file("bad")});
    REQUIRE(bad.exit_code == 2);
    REQUIRE_THAT(bad.err, ContainsSubstring("flip_noise"));
}

TEST_CASE("cluster writes codebook and report deterministically", "[cli]") {
    Fixture fx;
    const std::string out1 = fx.dir.file("run1");
    const auto r1 = run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                             "--k", "6", "--density-p", "0.3", "--seed", "4",
                             "--out", out1, "--trace", out1 + ".trace.csv"});
    REQUIRE(r1.exit_code == 0);

    const auto report = parse_json(support::read_file(out1 + ".report.json"));
    REQUIRE(report["algorithm"] == "awc");
    REQUIRE(report["k"].get<std::size_t>() == 6);
    REQUIRE(report["density_p"].get<double>() == 0.3);
    const double precision = report["precision"].get<double>();
    REQUIRE(precision > 0.0);
    REQUIRE(precision <= 1.0);
    std::uint64_t total = 0;
    for (const auto& s : report["cluster_sizes"]) {
        REQUIRE(s.get<std::uint64_t>() <= 40);
        total += s.get<std::uint64_t>();
    }
    REQUIRE(total == 240);

    const auto trace_lines = lines_of(support::read_file(out1 + ".trace.csv"));
    REQUIRE(trace_lines.front() == "iter,reassigned,precision");
    REQUIRE(trace_lines.size() >= 2);
    REQUIRE(split_csv_line(trace_lines[1])[0] == "1");

    const std::string out2 = fx.dir.file("run2");
    const auto r2 = run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                             "--k", "6", "--density-p", "0.3", "--seed", "4",
                             "--out", out2});
    REQUIRE(r2.exit_code == 0);
    REQUIRE(support::read_file(out1 + ".apcc") == support::read_file(out2 + ".apcc"));
    REQUIRE(support::read_file(out1 + ".report.json") ==
            support::read_file(out2 + ".report.json"));

    SECTION("thread override via environment keeps outputs byte-identical") {
        const std::string out3 = fx.dir.file("run3");
        const auto r3 = run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                                 "--k", "6", "--density-p", "0.3", "--seed", "4",
                                 "--out", out3},
                                "APC_THREADS=3 ");
        REQUIRE(r3.exit_code == 0);
        REQUIRE(support::read_file(out1 + ".apcc") == support::read_file(out3 + ".apcc"));
        REQUIRE(run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                         "--k", "6", "--out", fx.dir.file("x")},
                        "APC_THREADS=0 ").exit_code == 2);
        REQUIRE(run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                         "--k", "6", "--out", fx.dir.file("x")},
                        "APC_THREADS=abc ").exit_code == 2);
    }
    SECTION("baselines run through the same front end") {
        for (const std::string algo : {"bmf", "brbk"}) {
            const std::string out = fx.dir.file(algo);
            const auto r = run_cli({"cluster", "--input", fx.data(), "--algorithm", algo,
                                    "--k", "6", "--seed", "4", "--out", out});
            REQUIRE(r.exit_code == 0);
            const auto rep = parse_json(support::read_file(out + ".report.json"));
            REQUIRE(rep["algorithm"] == algo);
            REQUIRE(rep["density_p"].get<double>() == 0.0);
        }
    }
    SECTION("constraint violations exit with code 2") {
        const auto big_k = run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                                    "--k", "500", "--out", fx.dir.file("x")});
        REQUIRE(big_k.exit_code == 2);
        REQUIRE_THAT(big_k.err, ContainsSubstring("exceeds n_rows"));

        const auto tight = run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc",
                                    "--k", "6", "--capacity", "10",
                                    "--out", fx.dir.file("x")});
        REQUIRE(tight.exit_code == 2);
        REQUIRE_THAT(tight.err, ContainsSubstring("capacity"));
    }
    SECTION("missing input exits with code 1") {
        const auto r = run_cli({"cluster", "--input", fx.dir.file("absent.apcf"),
                                "--algorithm", "awc", "--k", "6",
                                "--out", fx.dir.file("x")});
        REQUIRE(r.exit_code == 1);
    }
}

TEST_CASE("eval scores stored codebooks", "[cli]") {
    Fixture fx;
    const std::string bmf_out = fx.dir.file("bmf");
    REQUIRE(run_cli({"cluster", "--input", fx.data(), "--algorithm", "bmf", "--k", "6",
                     "--seed", "4", "--out", bmf_out})
                .exit_code == 0);

    SECTION("hamming eval reproduces a converged training report") {
        const auto r = run_cli({"eval", "--input", fx.data(), "--codebook",
                                bmf_out + ".apcc", "--distance", "hamming"});
        REQUIRE(r.exit_code == 0);
        const auto evaluated = parse_json(r.out);
        const auto trained = parse_json(support::read_file(bmf_out + ".report.json"));
        REQUIRE(evaluated["distance"] == "hamming");
        REQUIRE(evaluated["precision"].get<double>() ==
                trained["precision"].get<double>());
        REQUIRE(evaluated["error_count"].get<std::uint64_t>() ==
                trained["error_count"].get<std::uint64_t>());
    }
    SECTION("unconstrained overlap eval can only improve on balanced training") {
        const std::string awc_out = fx.dir.file("awc");
        REQUIRE(run_cli({"cluster", "--input", fx.data(), "--algorithm", "awc", "--k", "6",
                         "--density-p", "0.3", "--seed", "4", "--out", awc_out})
                    .exit_code == 0);
        const std::string eval_path = fx.dir.file("eval.json");
        const auto r = run_cli({"eval", "--input", fx.data(), "--codebook",
                                awc_out + ".apcc", "--distance", "overlap",
                                "--out", eval_path});
        REQUIRE(r.exit_code == 0);
        const auto evaluated = parse_json(support::read_file(eval_path));
        const auto trained = parse_json(support::read_file(awc_out + ".report.json"));
        REQUIRE(evaluated["precision"].get<double>() >=
                trained["precision"].get<double>());
    }
    SECTION("dimension mismatches exit with code 2") {
        const std::string narrow = fx.dir.file("narrow");
        REQUIRE(run_cli({"generate", "--n-prototypes", "4", "--dim", "48", "--n-rows",
                         "100", "--proto-density", "0.3", "--seed", "2", "--out", narrow})
                    .exit_code == 0);
        const auto r = run_cli({"eval", "--input", narrow + ".apcf", "--codebook",
                                bmf_out + ".apcc"});
        REQUIRE(r.exit_code == 2);
        REQUIRE_THAT(r.err, ContainsSubstring("dim"));
    }
    SECTION("unknown distance exits with code 2") {
        REQUIRE(run_cli({"eval", "--input", fx.data(), "--codebook", bmf_out + ".apcc",
                         "--distance", "cosine"})
                    .exit_code == 2);
    }
}

TEST_CASE("sweep emits one row per cell plus a timing sidecar", "[cli]") {
    Fixture fx;
    const std::string csv = fx.dir.file("sweep.csv");
    const std::string books = fx.dir.file("books");
    const auto r = run_cli({"sweep", "--input", fx.data(), "--k", "4,6",
                            "--density-p", "0.3", "--algorithms", "awc,bmf",
                            "--seeds", "1,2", "--out", csv,
                            "--save-codebooks", books});
    REQUIRE(r.exit_code == 0);

    const auto rows = lines_of(support::read_file(csv));
    REQUIRE(rows.size() == 9);
    REQUIRE(rows[0] ==
            "algorithm,seed,k,density_p,precision,error_count,total_elements,"
            "element_accuracy,total_active,error");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto fields = split_csv_line(rows[i]);
        REQUIRE(fields.size() == 10);
        REQUIRE((fields[0] == "awc" || fields[0] == "bmf"));
        REQUIRE(fields[9].empty());
        REQUIRE(std::stod(fields[4]) >= 0.0);
        REQUIRE(std::stod(fields[4]) <= 1.0);
    }

    const auto timing_rows = lines_of(support::read_file(csv + ".timings.csv"));
    REQUIRE(timing_rows.size() == 9);
    REQUIRE(timing_rows[0] == "algorithm,seed,k,density_p,wall_seconds");

    for (const std::string name :
         {"awc_k4_p0.3_s1.apcc", "awc_k6_p0.3_s2.apcc", "bmf_k4_p0.3_s1.apcc"}) {
        REQUIRE(std::filesystem::exists(books + "/" + name));
    }

    SECTION("repeat runs and thread counts keep the grid byte-identical") {
        const std::string csv2 = fx.dir.file("sweep2.csv");
        const std::string books2 = fx.dir.file("books2");
        const auto r2 = run_cli({"sweep", "--input", fx.data(), "--k", "4,6",
                                 "--density-p", "0.3", "--algorithms", "awc,bmf",
                                 "--seeds", "1,2", "--out", csv2,
                                 "--save-codebooks", books2},
                                "APC_THREADS=4 ");
        REQUIRE(r2.exit_code == 0);
        REQUIRE(support::read_file(csv) == support::read_file(csv2));
        for (const auto& entry : std::filesystem::directory_iterator(books)) {
            const std::string name = entry.path().filename().string();
            REQUIRE(support::read_file(books + "/" + name) ==
                    support::read_file(books2 + "/" + name));
        }
    }
    SECTION("invalid grids are rejected before any output") {
        const std::string bad_csv = fx.dir.file("bad.csv");
        const auto bad = run_cli({"sweep", "--input", fx.data(), "--k", "0",
                                  "--out", bad_csv});
        REQUIRE(bad.exit_code == 2);
        REQUIRE_FALSE(std::filesystem::exists(bad_csv));
    }
    SECTION("per-cell failures land in the error column with exit 1") {
        const apc::PatternMatrix zeros(4, 8, std::vector<double>(32, 0.0));
        const std::string dead = fx.dir.file("zeros.apcf");
        apc::write_real_matrix(zeros, dead);
        const std::string dead_csv = fx.dir.file("dead.csv");
        const auto r_dead = run_cli({"sweep", "--input", dead, "--k", "2",
                                     "--algorithms", "awc,bmf,brbk", "--out", dead_csv});
        REQUIRE(r_dead.exit_code == 1);
        const auto dead_rows = lines_of(support::read_file(dead_csv));
        REQUIRE(dead_rows.size() == 4);
        for (std::size_t i = 1; i < dead_rows.size(); ++i) {
            const auto fields = split_csv_line(dead_rows[i]);
            REQUIRE(fields.size() == 10);
            REQUIRE(fields[4].empty());
            REQUIRE_FALSE(fields[9].empty());
        }
    }
}

TEST_CASE("compare runs every algorithm at one grid point", "[cli]") {
    Fixture fx;
    const std::string csv = fx.dir.file("compare.csv");
    const auto r = run_cli({"compare", "--input", fx.data(), "--k", "6",
                            "--density-p", "0.3", "--seeds", "1", "--out", csv});
    REQUIRE(r.exit_code == 0);
    const auto rows = lines_of(support::read_file(csv));
    REQUIRE(rows.size() == 4);
    std::vector<std::string> algos;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        algos.push_back(split_csv_line(rows[i])[0]);
    }
    REQUIRE(algos == std::vector<std::string>{"awc", "bmf", "brbk"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(split_csv_line(rows[i])[2] == "6");
        REQUIRE(split_csv_line(rows[i])[3] == "0.3");
    }
}
