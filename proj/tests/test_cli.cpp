#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "likert/cli.hpp"

using Catch::Matchers::ContainsSubstring;

#ifndef LIKERT_CLI_PATH
#error "LIKERT_CLI_PATH must name the built command-line binary"
#endif

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "likert_cli_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CommandResult run_cli(const std::string& args) {
    const auto dir = std::filesystem::temp_directory_path() / "likert_cli_tests";
    std::filesystem::create_directories(dir);
    const auto out_path = dir / "last_stdout.txt";
    const auto err_path = dir / "last_stderr.txt";
    const std::string command = std::string(LIKERT_CLI_PATH) + " " + args + " >" + out_path.string() +
                                " 2>" + err_path.string();
    const int status = std::system(command.c_str());
    CommandResult r;
    if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    r.out = read_bytes(out_path);
    r.err = read_bytes(err_path);
    return r;
}

// count column (index 2) of a bin CSV, header skipped.
std::vector<std::size_t> csv_counts(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::size_t> counts;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string field;
        for (int i = 0; i < 3; ++i) std::getline(fields, field, ',');
        counts.push_back(static_cast<std::size_t>(std::stoull(field)));
    }
    return counts;
}

}  // namespace

TEST_CASE("pipeline composes from synthesis to bin analysis without manual edits") {
    const auto dir = scratch_dir("pipeline");
    const std::string s = (dir / "synth").string();
    const std::string c = (dir / "corpus").string();
    const std::string e = (dir / "grid").string();

    auto r = run_cli("synth --out " + s + " --n 300 --k 5 --seed 21");
    REQUIRE(r.exit_code == 0);
    for (const auto* name : {"annotations.jsonl", "embeddings.bin", "manifest.json"}) {
        CHECK(std::filesystem::exists(std::filesystem::path(s) / name));
    }

    r = run_cli("ingest --annotations " + s + "/annotations.jsonl --embeddings " + s +
                "/embeddings.bin --k 5 --min-annotators 2 --out " + c);
    REQUIRE(r.exit_code == 0);
    const auto summary = nlohmann::json::parse(read_bytes(std::filesystem::path(c) / "summary.json"));
    CHECK(summary.at("items").get<int>() == 300);
    CHECK(summary.at("malformed_lines").get<int>() == 0);

    r = run_cli("experiment --corpus " + c + "/corpus.json --embeddings " + s +
                "/embeddings.bin --losses emd_mse,var_reg --seeds 1,2 --jobs 2 --out " + e);
    REQUIRE(r.exit_code == 0);
    const auto report = nlohmann::json::parse(read_bytes(std::filesystem::path(e) / "report.json"));
    REQUIRE(report.at("runs").size() == 4);
    REQUIRE(report.at("aggregates").size() == 2);
    CHECK(report.at("aggregates").at(0).at("var_spearman").at("values").size() == 2);
    const std::string csv = read_bytes(std::filesystem::path(e) / "report.csv");
    CHECK_THAT(csv, ContainsSubstring("emd_mse"));
    CHECK_THAT(csv, ContainsSubstring("var_reg"));
    for (const auto* run_dir : {"emd_mse_seed1", "emd_mse_seed2", "var_reg_seed1", "var_reg_seed2"}) {
        CHECK(std::filesystem::exists(std::filesystem::path(e) / "runs" / run_dir / "run.json"));
        CHECK(std::filesystem::exists(std::filesystem::path(e) / "runs" / run_dir / "checkpoint.bin"));
    }

    const std::string a = (dir / "bins").string();
    r = run_cli("analyze --run " + e + "/runs/emd_mse_seed1 --corpus " + c +
                "/corpus.json --embeddings " + s + "/embeddings.bin --out " + a);
    REQUIRE(r.exit_code == 0);
    const auto var_csv = read_bytes(std::filesystem::path(a) / "variance_bins.csv");
    const auto opp_csv = read_bytes(std::filesystem::path(a) / "opposition_bins.csv");

    // A 300-item corpus splits 150/75/75; every test item lands in a bin.
    std::size_t var_total = 0, opp_total = 0;
    for (auto n : csv_counts(var_csv)) var_total += n;
    for (auto n : csv_counts(opp_csv)) opp_total += n;
    CHECK(var_total == 75);
    CHECK(opp_total == 75);
    CHECK(csv_counts(var_csv).size() == 6);
    CHECK(csv_counts(opp_csv).size() == 5);

    // Recompute the variance table in-process from the same artifacts; the
    // analyze output must reproduce it byte for byte, which pins the split
    // reconstruction to the recorded seed.
    const auto corpus = likert::cli::load_corpus(c + "/corpus.json");
    const auto store = likert::load_embeddings(s + "/embeddings.bin");
    const auto ds = likert::build_dataset(corpus.items, store, corpus.scale);
    const auto run_j = nlohmann::json::parse(read_bytes(std::filesystem::path(e) / "runs" /
                                                        "emd_mse_seed1" / "run.json"));
    likert::SplitSpec spec;
    spec.train = run_j.at("split").at("train").get<double>();
    spec.validation = run_j.at("split").at("validation").get<double>();
    spec.test = run_j.at("split").at("test").get<double>();
    spec.seed = run_j.at("split").at("seed").get<std::uint64_t>();
    std::vector<std::string> ids;
    for (const auto& item : ds.items) ids.push_back(item.id);
    const auto split = likert::make_splits(ids, spec);
    const auto ckpt = likert::load_checkpoint(e + "/runs/emd_mse_seed1/checkpoint.bin");
    std::vector<double> target, pred;
    for (std::size_t idx : split.test) {
        target.push_back(ds.items[idx].target_var);
        pred.push_back(likert::predict_variance(ckpt.params, ckpt.config, ds.items[idx].features));
    }
    const auto table = likert::bin_analysis(
        target, pred, likert::equal_width_edges(0.0, likert::max_unbiased_variance(ds.scale), 6));
    CHECK(var_csv == likert::bin_table_csv(table));

    // A scalar-head run has no rating distribution to segment.
    const std::string na = (dir / "bins_na").string();
    r = run_cli("analyze --run " + e + "/runs/var_reg_seed1 --corpus " + c +
                "/corpus.json --embeddings " + s + "/embeddings.bin --out " + na);
    CHECK(r.exit_code == 2);
    CHECK_THAT(r.err, ContainsSubstring("n/a"));
    r = run_cli("analyze --run " + e + "/runs/var_reg_seed1 --corpus " + c +
                "/corpus.json --embeddings " + s + "/embeddings.bin --skip-opposition --out " + na);
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(std::filesystem::path(na) / "variance_bins.csv"));
    CHECK_FALSE(std::filesystem::exists(std::filesystem::path(na) / "opposition_bins.csv"));
}

TEST_CASE("identical invocations replay byte-identically") {
    const auto dir = scratch_dir("replay");
    const std::string s1 = (dir / "s1").string();
    const std::string s2 = (dir / "s2").string();
    REQUIRE(run_cli("synth --out " + s1 + " --n 120 --seed 7").exit_code == 0);
    REQUIRE(run_cli("synth --out " + s2 + " --n 120 --seed 7").exit_code == 0);
    for (const auto* name : {"annotations.jsonl", "embeddings.bin", "manifest.json"}) {
        CHECK(read_bytes(std::filesystem::path(s1) / name) ==
              read_bytes(std::filesystem::path(s2) / name));
    }

    const std::string c = (dir / "c").string();
    REQUIRE(run_cli("ingest --annotations " + s1 + "/annotations.jsonl --embeddings " + s1 +
                    "/embeddings.bin --min-annotators 2 --out " + c)
                .exit_code == 0);
    const std::string grid = " --corpus " + c + "/corpus.json --embeddings " + s1 +
                             "/embeddings.bin --losses emd --seeds 1,2";
    const std::string e1 = (dir / "e1").string();
    const std::string e2 = (dir / "e2").string();
    REQUIRE(run_cli("experiment" + grid + " --out " + e1).exit_code == 0);
    REQUIRE(run_cli("experiment" + grid + " --out " + e2).exit_code == 0);
    for (const auto* name : {"report.json", "report.csv", "manifest.json"}) {
        CHECK(read_bytes(std::filesystem::path(e1) / name) ==
              read_bytes(std::filesystem::path(e2) / name));
    }
    CHECK(read_bytes(std::filesystem::path(e1) / "runs" / "emd_seed1" / "checkpoint.bin") ==
          read_bytes(std::filesystem::path(e2) / "runs" / "emd_seed1" / "checkpoint.bin"));
}

TEST_CASE("config file values yield to flags and fill in defaults") {
    const auto dir = scratch_dir("config");
    const auto cfg = dir / "synth.cfg";
    std::ofstream(cfg) << "# defaults for the corpus shape\n"
                          "k = 7\n"
                          "noise-temp = 0.3\n";

    const std::string d1 = (dir / "d1").string();
    auto r = run_cli("synth --config " + cfg.string() + " --n 40 --out " + d1);
    REQUIRE(r.exit_code == 0);
    auto manifest = nlohmann::json::parse(read_bytes(std::filesystem::path(d1) / "manifest.json"));
    CHECK(manifest.at("config").at("k").get<int>() == 7);
    CHECK(manifest.at("config").at("noise_temp").get<double>() == 0.3);

    const std::string d2 = (dir / "d2").string();
    r = run_cli("synth --config " + cfg.string() + " --k 4 --n 40 --out " + d2);
    REQUIRE(r.exit_code == 0);
    manifest = nlohmann::json::parse(read_bytes(std::filesystem::path(d2) / "manifest.json"));
    CHECK(manifest.at("config").at("k").get<int>() == 4);  // the flag wins
    CHECK(manifest.at("config").at("noise_temp").get<double>() == 0.3);

    const auto bad = dir / "bad.cfg";
    std::ofstream(bad) << "bogus-key = 1\n";
    r = run_cli("synth --config " + bad.string() + " --n 40 --out " + (dir / "d3").string());
    CHECK(r.exit_code == 2);
    CHECK_THAT(r.err, ContainsSubstring("unknown option"));
}

TEST_CASE("invalid invocations exit with the validation code") {
    const auto dir = scratch_dir("invalid");

    CHECK(run_cli("synth --n 10").exit_code == 2);  // --out missing
    CHECK(run_cli("train --loss nope --corpus x --embeddings y --out z").exit_code == 2);
    CHECK(run_cli("ingest --annotations " + (dir / "absent.jsonl").string() + " --embeddings " +
                  (dir / "absent.bin").string() + " --out " + (dir / "c").string())
              .exit_code == 2);

    // The spec'd single-profile corpus is a valid request.
    const std::string mix = (dir / "mix").string();
    const auto r = run_cli("synth --out " + mix + " --n 30 --mixture polarized=1.0");
    REQUIRE(r.exit_code == 0);
    const auto manifest = nlohmann::json::parse(read_bytes(std::filesystem::path(mix) / "manifest.json"));
    CHECK(manifest.at("config").at("mixture").at("polarized").get<double>() == 1.0);
    CHECK(manifest.at("config").at("mixture").at("skewed").get<double>() == 0.0);

    // Weights that do not sum to one are rejected by validation.
    CHECK(run_cli("synth --out " + (dir / "m2").string() + " --n 30 --mixture polarized=0.4")
              .exit_code == 2);
}

TEST_CASE("a corpus item without an embedding fails ingestion by name") {
    const auto dir = scratch_dir("missing_embedding");
    const std::string big = (dir / "big").string();
    const std::string small = (dir / "small").string();
    REQUIRE(run_cli("synth --out " + big + " --n 60 --seed 4").exit_code == 0);
    REQUIRE(run_cli("synth --out " + small + " --n 50 --seed 4").exit_code == 0);

    // Item ids are index-based, so the 50-item embedding file covers only a
    // prefix of the 60-item annotation set.
    const auto r = run_cli("ingest --annotations " + big + "/annotations.jsonl --embeddings " + small +
                           "/embeddings.bin --min-annotators 2 --out " + (dir / "c").string());
    CHECK(r.exit_code == 2);
    CHECK_THAT(r.err, ContainsSubstring("missing embedding"));
    CHECK_THAT(r.err, ContainsSubstring("synth_000050"));
}

TEST_CASE("a corrupt corpus file is a runtime failure") {
    const auto dir = scratch_dir("corrupt");
    const auto corpus = dir / "corpus.json";
    std::ofstream(corpus) << "this is not json";
    const std::string s = (dir / "s").string();
    REQUIRE(run_cli("synth --out " + s + " --n 30 --seed 2").exit_code == 0);
    const auto r = run_cli("train --corpus " + corpus.string() + " --embeddings " + s +
                           "/embeddings.bin --loss emd --out " + (dir / "t").string());
    CHECK(r.exit_code == 3);
    CHECK_THAT(r.err, ContainsSubstring("not valid JSON"));
}

TEST_CASE("divergence is reported with the loss kind and seed") {
    const auto dir = scratch_dir("divergence");
    const std::string s = (dir / "s").string();
    const std::string c = (dir / "c").string();
    REQUIRE(run_cli("synth --out " + s + " --n 80 --seed 5").exit_code == 0);
    REQUIRE(run_cli("ingest --annotations " + s + "/annotations.jsonl --embeddings " + s +
                    "/embeddings.bin --min-annotators 2 --out " + c)
                .exit_code == 0);
    const auto r = run_cli("train --corpus " + c + "/corpus.json --embeddings " + s +
                           "/embeddings.bin --loss binary_ce --optimizer sgd --lr 1e12 --seed 3 --out " +
                           (dir / "t").string());
    CHECK(r.exit_code == 3);
    CHECK_THAT(r.err, ContainsSubstring("diverged"));
    CHECK_THAT(r.err, ContainsSubstring("binary_ce"));
    CHECK_THAT(r.err, ContainsSubstring("seed 3"));
}
