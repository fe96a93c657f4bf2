#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "likert/checkpoint.hpp"
#include "likert/embedding_io.hpp"
#include "likert/eval.hpp"
#include "likert/ingest.hpp"
#include "likert/reporting.hpp"
#include "likert/sha256.hpp"
#include "likert/synth.hpp"
#include "likert/trainer.hpp"
#include "likert/version.hpp"

namespace likert::cli {

// ---------------------------------------------------------------------------
// Run manifest

// Input file fingerprint recorded in the manifest.
struct ManifestInput {
    std::string role;
    std::string path;
    std::string digest;  // sha256 of the file bytes
};

// Everything needed to replay a command byte-for-byte: the command name,
// every resolved option value (after flag > config file > default
// precedence), digests of the input files, and the seeds in play. The
// manifest deliberately carries no timestamps or host details, so a rerun
// writes identical bytes.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<ManifestInput> inputs;
    std::vector<std::uint64_t> seeds;
};

inline ManifestInput manifest_input(const std::string& role, const std::string& path) {
    return ManifestInput{role, path, sha256_hex(detail::read_file(path))};
}

inline nlohmann::ordered_json manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["artifact_version"] = kVersionString;
    j["config"] = m.config;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& in : m.inputs) {
        inputs.push_back({{"role", in.role}, {"path", in.path}, {"sha256", in.digest}});
    }
    j["inputs"] = inputs;
    j["seeds"] = m.seeds;
    return j;
}

inline void write_manifest(const RunManifest& m, const std::string& out_dir) {
    detail::write_file_atomic(out_dir + "/manifest.json", manifest_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Corpus file format

// Filtered corpus on disk: the scale plus each surviving item's raw ratings,
// in ingestion order. Item order is load-bearing: splits are drawn over the
// positions of this list, so a run's exact test split can be rebuilt later
// from the corpus file and the recorded split seed.
struct CorpusFile {
    RatingScale scale;
    std::vector<ItemAnnotations> items;
};

inline std::string corpus_json(const std::vector<ItemAnnotations>& items, const RatingScale& scale) {
    scale.validate();
    nlohmann::ordered_json j;
    j["k"] = scale.k;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& item : items) {
        item.validate(scale);
        arr.push_back({{"id", item.id}, {"ratings", item.ratings}});
    }
    j["items"] = std::move(arr);
    return j.dump() + "\n";
}

inline CorpusFile parse_corpus_json(const std::string& blob) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(blob);
    } catch (const nlohmann::json::parse_error&) {
        throw std::runtime_error("corpus file is not valid JSON");
    }
    CorpusFile corpus;
    try {
        corpus.scale = RatingScale{j.at("k").get<int>()};
        for (const auto& entry : j.at("items")) {
            corpus.items.push_back(
                ItemAnnotations{entry.at("id").get<std::string>(), entry.at("ratings").get<std::vector<int>>()});
        }
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("corpus file is missing k/items fields");
    }
    corpus.scale.validate();
    std::unordered_set<std::string> seen;
    for (const auto& item : corpus.items) {
        item.validate(corpus.scale);
        if (!seen.insert(item.id).second) {
            throw std::runtime_error("corpus file has duplicate item id '" + item.id + "'");
        }
    }
    return corpus;
}

inline CorpusFile load_corpus(const std::string& path) {
    return parse_corpus_json(detail::read_file(path));
}

inline Dataset load_dataset(const std::string& corpus_path, const std::string& embeddings_path) {
    const auto corpus = load_corpus(corpus_path);
    const auto store = load_embeddings(embeddings_path);
    return build_dataset(corpus.items, store, corpus.scale);
}

// ---------------------------------------------------------------------------
// Option structs (one per subcommand)

struct SynthOptions {
    std::string out;
    int n_items = 1000;
    int k = 5;
    std::vector<int> annotators{5, 5};  // COUNT or LO,HI
    double noise_temp = 0.1;
    int feature_dim = 16;
    std::uint64_t seed = 1;
    std::string mixture;  // "name=weight,..."; empty keeps the default mixture
};

struct IngestOptions {
    std::string annotations;
    std::string embeddings;
    std::string out;
    std::string format = "jsonl";
    int k = 5;
    int min_annotators = 1;
    bool merge_duplicates = false;
    int summary_bins = 20;
};

// Options shared by train and experiment.
struct FitOptions {
    std::string corpus;
    std::string embeddings;
    std::string out;
    std::vector<double> splits{0.5, 0.25, 0.25};
    int patience = 5;
    std::vector<int> hidden{256, 64};
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 200;
    std::string optimizer = "adam";
    std::string activation = "relu";
    double lambda_mean = 1.0;
    int emd_power = 2;
};

struct TrainOptions : FitOptions {
    std::string loss;
    std::uint64_t seed = 1;
};

struct ExperimentOptions : FitOptions {
    std::vector<std::string> losses{"all"};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    unsigned jobs = 1;
};

struct AnalyzeOptions {
    std::string run_dir;
    std::string corpus;
    std::string embeddings;
    std::string out;
    int var_bins = 6;
    int opp_bins = 5;
    bool skip_opposition = false;
};

// ---------------------------------------------------------------------------
// Option parsing helpers

// "--mixture polarized=0.5,consensus_mid=0.5": named weights that must sum
// to one; profiles not named get zero. An empty spec keeps the generator's
// default mixture.
inline std::array<double, kProfileCount> parse_mixture(const std::string& spec) {
    if (spec.empty()) return SynthConfig{}.mixture;
    std::array<double, kProfileCount> weights{};
    std::array<bool, kProfileCount> named{};
    std::stringstream parts(spec);
    std::string part;
    while (std::getline(parts, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == part.size()) {
            throw std::invalid_argument("--mixture parts must look like name=weight: '" + part + "'");
        }
        const std::string name = part.substr(0, eq);
        std::size_t idx = kProfileCount;
        for (std::size_t p = 0; p < kProfileCount; ++p) {
            if (name == profile_name(static_cast<Profile>(p))) {
                idx = p;
                break;
            }
        }
        if (idx == kProfileCount) {
            throw std::invalid_argument("--mixture names an unknown profile: '" + name + "'");
        }
        if (named[idx]) throw std::invalid_argument("--mixture names '" + name + "' twice");
        named[idx] = true;
        const std::string value = part.substr(eq + 1);
        std::size_t used = 0;
        double w = 0.0;
        try {
            w = std::stod(value, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != value.size()) {
            throw std::invalid_argument("--mixture weight is not a number: '" + part + "'");
        }
        weights[idx] = w;
    }
    return weights;
}

inline AnnotatorRange parse_annotators(const std::vector<int>& values) {
    if (values.size() == 1) return AnnotatorRange{values[0], values[0]};
    if (values.size() == 2) return AnnotatorRange{values[0], values[1]};
    throw std::invalid_argument("--annotators takes COUNT or LO,HI");
}

inline SplitSpec parse_splits(const std::vector<double>& ratios) {
    if (ratios.size() != 3) {
        throw std::invalid_argument("--splits needs exactly three ratios, e.g. 0.5,0.25,0.25");
    }
    SplitSpec spec;
    spec.train = ratios[0];
    spec.validation = ratios[1];
    spec.test = ratios[2];
    return spec;
}

// Grid order for `--losses all`; also the order report rows appear in.
inline const std::vector<std::string>& all_loss_names() {
    static const std::vector<std::string> names{"binary_ce", "var_reg", "emd",
                                                "emd_mse",   "cum_ce",  "kl_soft"};
    return names;
}

inline std::vector<LossKind> expand_losses(const std::vector<std::string>& names, double lambda_mean,
                                           int emd_power) {
    std::vector<std::string> resolved;
    if (names.size() == 1 && names[0] == "all") {
        resolved = all_loss_names();
    } else {
        for (const auto& name : names) {
            if (name == "all") throw std::invalid_argument("--losses 'all' cannot be combined with names");
            resolved.push_back(name);
        }
    }
    std::unordered_set<std::string> seen;
    std::vector<LossKind> kinds;
    for (const auto& name : resolved) {
        if (!seen.insert(name).second) throw std::invalid_argument("--losses repeats '" + name + "'");
        LossKind kind{parse_loss_tag(name), lambda_mean, emd_power};
        kind.validate();
        kinds.push_back(kind);
    }
    return kinds;
}

inline ExperimentPlan make_plan(const FitOptions& o, std::vector<LossKind> losses,
                                std::vector<std::uint64_t> seeds, unsigned jobs) {
    ExperimentPlan plan;
    plan.hidden_dims = o.hidden;
    plan.activation = parse_activation(o.activation);
    plan.train.learning_rate = o.learning_rate;
    plan.train.batch_size = o.batch_size;
    plan.train.max_epochs = o.max_epochs;
    plan.train.patience = o.patience;
    plan.train.optimizer = parse_optimizer(o.optimizer);
    plan.split = parse_splits(o.splits);
    plan.losses = std::move(losses);
    plan.seeds = std::move(seeds);
    plan.jobs = jobs;
    plan.validate();
    return plan;
}

// Shared manifest keys for train and experiment.
inline nlohmann::ordered_json fit_config_json(const FitOptions& o) {
    nlohmann::ordered_json j;
    j["splits"] = o.splits;
    j["patience"] = o.patience;
    j["hidden"] = o.hidden;
    j["learning_rate"] = o.learning_rate;
    j["batch_size"] = o.batch_size;
    j["max_epochs"] = o.max_epochs;
    j["optimizer"] = o.optimizer;
    j["activation"] = o.activation;
    return j;
}

// ---------------------------------------------------------------------------
// Run artifacts

// The run record extends the outcome with the split geometry, so the exact
// test split can be rebuilt later from the corpus file: same item order,
// same ratios, same seed give the same assignment.
inline nlohmann::ordered_json run_record_json(const RunOutcome& run, const SplitSpec& split) {
    auto j = run_outcome_json(run);
    j["split"] = {{"train", split.train},
                  {"validation", split.validation},
                  {"test", split.test},
                  {"seed", run.seed}};
    return j;
}

inline void write_run_dir(const std::string& dir, const RunOutcome& run, const SplitSpec& split) {
    std::filesystem::create_directories(dir);
    detail::write_file_atomic(dir + "/run.json", run_record_json(run, split).dump(2) + "\n");
    save_checkpoint(run.model_cfg, run.train_result.best_params, dir + "/checkpoint.bin");
}

// ---------------------------------------------------------------------------
// Subcommand bodies

inline int run_synth(const SynthOptions& o) {
    SynthConfig cfg;
    cfg.n_items = o.n_items;
    cfg.k_levels = o.k;
    cfg.annotators = parse_annotators(o.annotators);
    cfg.mixture = parse_mixture(o.mixture);
    cfg.noise_temp = o.noise_temp;
    cfg.feature_dim = o.feature_dim;
    cfg.seed = o.seed;
    const auto items = generate_corpus(cfg);  // validates cfg

    std::filesystem::create_directories(o.out);
    write_corpus(items, o.out + "/annotations.jsonl", o.out + "/embeddings.bin");

    RunManifest m;
    m.command = "synth";
    m.config["n"] = cfg.n_items;
    m.config["k"] = cfg.k_levels;
    m.config["annotators"] = {cfg.annotators.lo, cfg.annotators.hi};
    nlohmann::ordered_json mixture;
    for (std::size_t p = 0; p < kProfileCount; ++p) {
        mixture[profile_name(static_cast<Profile>(p))] = cfg.mixture[p];
    }
    m.config["mixture"] = std::move(mixture);
    m.config["noise_temp"] = cfg.noise_temp;
    m.config["feature_dim"] = cfg.feature_dim;
    m.config["seed"] = cfg.seed;
    m.seeds = {cfg.seed};
    write_manifest(m, o.out);

    std::size_t annotations = 0;
    for (const auto& item : items) annotations += item.ratings.size();
    std::cout << "synth: wrote " << items.size() << " items (" << annotations << " annotations) to "
              << o.out << "\n";
    return 0;
}

inline int run_ingest(const IngestOptions& o) {
    IngestConfig cfg{o.k, o.min_annotators, o.merge_duplicates};
    cfg.validate();
    const RatingScale scale{o.k};
    const auto parsed = parse_annotations(o.annotations, parse_annotation_format(o.format), scale);
    const auto items = group_and_filter(parsed.records, cfg);
    if (items.empty()) {
        throw std::invalid_argument("no items survive the min-annotators filter (threshold " +
                                    std::to_string(o.min_annotators) + ")");
    }

    const auto store = load_embeddings(o.embeddings);
    std::vector<std::string> missing;
    for (const auto& item : items) {
        if (!store.contains(item.id)) missing.push_back(item.id);
    }
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "missing embedding for " << missing.size() << " item(s):";
        for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg << " '" << missing[i] << "'";
        if (missing.size() > 5) msg << " ...";
        throw std::invalid_argument(msg.str());
    }

    const auto summary = summarize(items, scale, o.summary_bins);

    std::filesystem::create_directories(o.out);
    detail::write_file_atomic(o.out + "/corpus.json", corpus_json(items, scale));
    nlohmann::ordered_json s;
    s["items"] = summary.n_items;
    s["annotations"] = summary.n_annotations;
    s["annotators"] = {{"mean", summary.annotators_mean},
                       {"min", summary.annotators_min},
                       {"max", summary.annotators_max}};
    s["items_with_variance"] = summary.variance_items;
    s["data_lines"] = parsed.data_lines;
    s["malformed_lines"] = parsed.errors.size();
    detail::write_file_atomic(o.out + "/summary.json", s.dump(2) + "\n");
    detail::write_file_atomic(o.out + "/mean_hist.csv", histogram_csv(summary.mean_hist));
    detail::write_file_atomic(o.out + "/variance_hist.csv", histogram_csv(summary.variance_hist));

    RunManifest m;
    m.command = "ingest";
    m.config["format"] = o.format;
    m.config["k"] = o.k;
    m.config["min_annotators"] = o.min_annotators;
    m.config["merge_duplicates"] = o.merge_duplicates;
    m.config["summary_bins"] = o.summary_bins;
    m.inputs = {manifest_input("annotations", o.annotations), manifest_input("embeddings", o.embeddings)};
    write_manifest(m, o.out);

    std::cout << "ingest: kept " << summary.n_items << " items (" << summary.n_annotations
              << " annotations, " << parsed.errors.size() << " malformed lines dropped) to " << o.out
              << "\n";
    return 0;
}

inline int run_train(const TrainOptions& o) {
    LossKind kind{parse_loss_tag(o.loss), o.lambda_mean, o.emd_power};
    kind.validate();
    const auto plan = make_plan(o, {kind}, {o.seed}, 1);
    const auto ds = load_dataset(o.corpus, o.embeddings);
    const auto outcome = run_cell(ds, plan, kind, o.seed);

    write_run_dir(o.out, outcome, plan.split);
    RunManifest m;
    m.command = "train";
    m.config = fit_config_json(o);
    m.config["loss"] = loss_kind_json(kind);
    m.config["seed"] = o.seed;
    m.inputs = {manifest_input("corpus", o.corpus), manifest_input("embeddings", o.embeddings)};
    m.seeds = {o.seed};
    write_manifest(m, o.out);

    const auto& test = outcome.test_report;
    std::cout << "train: loss '" << o.loss << "' seed " << o.seed << " stopped at best epoch "
              << outcome.train_result.best_epoch << "; test var_mse " << test.var_mse << " var_spearman "
              << test.var_spearman << " disagree_f1 " << test.disagree_f1 << "\n";
    return 0;
}

inline int run_experiment_cmd(const ExperimentOptions& o) {
    const auto losses = expand_losses(o.losses, o.lambda_mean, o.emd_power);
    const auto plan = make_plan(o, losses, o.seeds, o.jobs);
    const auto ds = load_dataset(o.corpus, o.embeddings);
    const auto report = run_experiment(ds, plan);

    std::filesystem::create_directories(o.out);
    detail::write_file_atomic(o.out + "/report.json", experiment_report_json(report).dump(2) + "\n");
    detail::write_file_atomic(o.out + "/report.csv", experiment_report_csv(report));
    for (const auto& run : report.runs) {
        write_run_dir(o.out + "/runs/" + loss_tag_name(run.loss.tag) + "_seed" + std::to_string(run.seed),
                      run, plan.split);
    }

    RunManifest m;
    m.command = "experiment";
    m.config = fit_config_json(o);
    nlohmann::ordered_json loss_list = nlohmann::ordered_json::array();
    for (const auto& kind : losses) loss_list.push_back(loss_kind_json(kind));
    m.config["losses"] = std::move(loss_list);
    m.config["jobs"] = o.jobs;
    m.inputs = {manifest_input("corpus", o.corpus), manifest_input("embeddings", o.embeddings)};
    m.seeds = o.seeds;
    write_manifest(m, o.out);

    for (const auto& agg : report.aggregates) {
        std::cout << "experiment: " << loss_tag_name(agg.loss.tag) << " var_mse " << agg.var_mse.mean
                  << " +- " << agg.var_mse.stddev << ", var_spearman " << agg.var_spearman.mean << " +- "
                  << agg.var_spearman.stddev << ", disagree_f1 " << agg.disagree_f1.mean << " +- "
                  << agg.disagree_f1.stddev << "\n";
    }
    return 0;
}

inline int run_analyze(const AnalyzeOptions& o) {
    nlohmann::json run_j;
    try {
        run_j = nlohmann::json::parse(detail::read_file(o.run_dir + "/run.json"));
    } catch (const nlohmann::json::parse_error&) {
        throw std::runtime_error("run record is not valid JSON: " + o.run_dir + "/run.json");
    }
    SplitSpec split_spec;
    try {
        const auto& s = run_j.at("split");
        split_spec.train = s.at("train").get<double>();
        split_spec.validation = s.at("validation").get<double>();
        split_spec.test = s.at("test").get<double>();
        split_spec.seed = s.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("run record is missing the split block: " + o.run_dir + "/run.json");
    }

    const auto ckpt = load_checkpoint(o.run_dir + "/checkpoint.bin");
    const auto ds = load_dataset(o.corpus, o.embeddings);
    if (ckpt.config.input_dim != ds.feature_dim) {
        throw std::invalid_argument("checkpoint expects input dim " + std::to_string(ckpt.config.input_dim) +
                                    " but the embeddings have dim " + std::to_string(ds.feature_dim));
    }
    const bool has_distribution_head = ckpt.config.head.tag == HeadTag::Distribution;
    if (has_distribution_head && ckpt.config.head.k != ds.scale.k) {
        throw std::invalid_argument("checkpoint head has K=" + std::to_string(ckpt.config.head.k) +
                                    " but the corpus scale is K=" + std::to_string(ds.scale.k));
    }
    if (!has_distribution_head && !o.skip_opposition) {
        throw std::invalid_argument(std::string("opposition analysis: n/a — checkpoint head '") +
                                    head_tag_name(ckpt.config.head.tag) +
                                    "' does not predict a rating distribution (pass --skip-opposition "
                                    "to emit the variance table only)");
    }

    std::vector<std::string> ids;
    ids.reserve(ds.items.size());
    for (const auto& item : ds.items) ids.push_back(item.id);
    const auto split = make_splits(ids, split_spec);
    if (split.test.empty()) throw std::invalid_argument("reconstructed test split is empty");

    std::vector<double> var_target, var_pred;
    for (std::size_t idx : split.test) {
        const auto& item = ds.items[idx];
        var_target.push_back(item.target_var);
        var_pred.push_back(predict_variance(ckpt.params, ckpt.config, item.features));
    }
    const auto var_edges = equal_width_edges(0.0, max_unbiased_variance(ds.scale), o.var_bins);
    const auto var_table = bin_analysis(var_target, var_pred, var_edges);

    std::filesystem::create_directories(o.out);
    detail::write_file_atomic(o.out + "/variance_bins.csv", bin_table_csv(var_table));

    bool wrote_opposition = false;
    if (has_distribution_head && !o.skip_opposition) {
        std::vector<double> opp_target, opp_pred;
        for (std::size_t idx : split.test) {
            const auto& item = ds.items[idx];
            opp_target.push_back(opposition_index(item.target_dist));
            opp_pred.push_back(
                opposition_index(LikertDistribution{forward(ckpt.params, ckpt.config, item.features)}));
        }
        const auto opp_table = bin_analysis(opp_target, opp_pred, equal_width_edges(0.0, 1.0, o.opp_bins));
        detail::write_file_atomic(o.out + "/opposition_bins.csv", bin_table_csv(opp_table));
        wrote_opposition = true;
    }

    RunManifest m;
    m.command = "analyze";
    m.config["var_bins"] = o.var_bins;
    m.config["opp_bins"] = o.opp_bins;
    m.config["skip_opposition"] = o.skip_opposition;
    m.inputs = {manifest_input("run", o.run_dir + "/run.json"),
                manifest_input("checkpoint", o.run_dir + "/checkpoint.bin"),
                manifest_input("corpus", o.corpus), manifest_input("embeddings", o.embeddings)};
    m.seeds = {split_spec.seed};
    write_manifest(m, o.out);

    std::cout << "analyze: wrote variance_bins.csv" << (wrote_opposition ? " and opposition_bins.csv" : "")
              << " for " << split.test.size() << " test items to " << o.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Wiring

// Errors leave a single machine-readable line on stderr.
inline int fail(const std::string& command, const std::string& message, int code) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["error"] = message;
    j["exit_code"] = code;
    std::cerr << j.dump() << "\n";
    return code;
}

inline void add_fit_flags(CLI::App* sub, FitOptions& o) {
    sub->add_option("--corpus", o.corpus, "corpus JSON from ingest")->required()->check(CLI::ExistingFile);
    sub->add_option("--embeddings", o.embeddings, "embedding file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--splits", o.splits, "train,validation,test ratios")
        ->delimiter(',')
        ->expected(3)
        ->capture_default_str();
    sub->add_option("--patience", o.patience, "epochs without validation improvement before stopping")
        ->capture_default_str();
    sub->add_option("--hidden", o.hidden, "hidden layer widths")->delimiter(',')->capture_default_str();
    sub->add_option("--lr", o.learning_rate, "learning rate")->capture_default_str();
    sub->add_option("--batch", o.batch_size, "mini-batch size")->capture_default_str();
    sub->add_option("--max-epochs", o.max_epochs, "epoch cap")->capture_default_str();
    sub->add_option("--optimizer", o.optimizer, "parameter update rule")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    sub->add_option("--activation", o.activation, "hidden activation")
        ->check(CLI::IsMember({"relu", "tanh"}))
        ->capture_default_str();
    sub->add_option("--lambda-mean", o.lambda_mean, "mean-gap weight for emd_mse")->capture_default_str();
    sub->add_option("--emd-power", o.emd_power, "exponent on CDF gaps for emd losses")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
}

struct CliOptions {
    SynthOptions synth;
    IngestOptions ingest;
    TrainOptions train;
    ExperimentOptions experiment;
    AnalyzeOptions analyze;
    std::string config_path;  // shared: exactly one subcommand parses per run
};

struct Subcommands {
    CLI::App* synth;
    CLI::App* ingest;
    CLI::App* train;
    CLI::App* experiment;
    CLI::App* analyze;

    [[nodiscard]] CLI::App* active() const {
        for (auto* sub : {synth, ingest, train, experiment, analyze}) {
            if (sub->parsed()) return sub;
        }
        return nullptr;
    }
};

inline Subcommands register_commands(CLI::App& app, CliOptions& o) {
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic annotation corpus with embeddings");
    synth->add_option("--out", o.synth.out, "output directory")->required();
    synth->add_option("--n", o.synth.n_items, "number of items")->capture_default_str();
    synth->add_option("--k", o.synth.k, "number of rating options")->capture_default_str();
    synth->add_option("--annotators", o.synth.annotators, "annotators per item: COUNT or LO,HI")
        ->delimiter(',')
        ->expected(1, 2)
        ->capture_default_str();
    synth->add_option("--mixture", o.synth.mixture,
                      "profile weights as name=w,... (consensus_low, consensus_mid, consensus_high, "
                      "skewed, polarized); unnamed profiles get 0");
    synth->add_option("--noise-temp", o.synth.noise_temp, "annotator noise temperature")
        ->capture_default_str();
    synth->add_option("--feature-dim", o.synth.feature_dim, "embedding dimension")->capture_default_str();
    synth->add_option("--seed", o.synth.seed, "corpus seed")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "validate, filter, and summarize an annotation corpus");
    ingest->add_option("--annotations", o.ingest.annotations, "annotation file")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--embeddings", o.ingest.embeddings, "embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--out", o.ingest.out, "output directory")->required();
    ingest->add_option("--format", o.ingest.format, "annotation file format")
        ->check(CLI::IsMember({"jsonl", "csv"}))
        ->capture_default_str();
    ingest->add_option("--k", o.ingest.k, "number of rating options")->capture_default_str();
    ingest->add_option("--min-annotators", o.ingest.min_annotators, "drop items with fewer ratings")
        ->capture_default_str();
    ingest->add_flag("--merge-duplicates", o.ingest.merge_duplicates,
                     "pool ratings of items with byte-identical text");
    ingest->add_option("--summary-bins", o.ingest.summary_bins, "histogram bins in the summary")
        ->capture_default_str();

    auto* train = app.add_subcommand("train", "train one model and report test metrics");
    add_fit_flags(train, o.train);
    train->add_option("--loss", o.train.loss, "training objective")
        ->required()
        ->check(CLI::IsMember(all_loss_names()));
    train->add_option("--seed", o.train.seed, "split/init/shuffle seed")->capture_default_str();

    auto* experiment =
        app.add_subcommand("experiment", "train the loss grid across seeds and aggregate metrics");
    add_fit_flags(experiment, o.experiment);
    experiment->add_option("--losses", o.experiment.losses, "loss kinds, or 'all'")
        ->delimiter(',')
        ->check(CLI::IsMember({"all", "binary_ce", "var_reg", "emd", "emd_mse", "cum_ce", "kl_soft"}))
        ->capture_default_str();
    experiment->add_option("--seeds", o.experiment.seeds, "split/init/shuffle seeds")
        ->delimiter(',')
        ->capture_default_str();
    experiment->add_option("--jobs", o.experiment.jobs, "parallel (loss, seed) cells")
        ->capture_default_str();

    auto* analyze = app.add_subcommand("analyze", "bin test-split predictions of a finished run");
    analyze->add_option("--run", o.analyze.run_dir, "run directory with run.json and checkpoint.bin")
        ->required()
        ->check(CLI::ExistingDirectory);
    analyze->add_option("--corpus", o.analyze.corpus, "corpus JSON from ingest")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--embeddings", o.analyze.embeddings, "embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--out", o.analyze.out, "output directory")->required();
    analyze->add_option("--var-bins", o.analyze.var_bins, "target-variance bins")->capture_default_str();
    analyze->add_option("--opp-bins", o.analyze.opp_bins, "target-opposition bins")->capture_default_str();
    analyze->add_flag("--skip-opposition", o.analyze.skip_opposition,
                      "emit only the variance table (required for non-distribution heads)");

    Subcommands subs{synth, ingest, train, experiment, analyze};
    for (auto* sub : {synth, ingest, train, experiment, analyze}) {
        sub->add_option("--config", o.config_path, "read option defaults from a key=value file")
            ->check(CLI::ExistingFile);
    }
    return subs;
}

// ---------------------------------------------------------------------------
// Config files: key=value lines, '#' comments. An entry only applies when
// the same option was not given on the command line, so precedence is
// flag > config file > built-in default.

struct ConfigEntry {
    std::string key;
    std::string value;
};

inline std::vector<ConfigEntry> parse_config_file(const std::string& path) {
    std::istringstream in(detail::read_file(path));
    auto trim = [](std::string s) {
        const auto from = s.find_first_not_of(" \t");
        if (from == std::string::npos) return std::string();
        return s.substr(from, s.find_last_not_of(" \t") - from + 1);
    };
    std::vector<ConfigEntry> entries;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config file line " + std::to_string(line_no) +
                                        " is not key=value: '" + stripped + "'");
        }
        ConfigEntry entry{trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1))};
        if (entry.key.empty()) {
            throw std::invalid_argument("config file line " + std::to_string(line_no) + " has an empty key");
        }
        if (!seen.insert(entry.key).second) {
            throw std::invalid_argument("config file sets '" + entry.key + "' twice");
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

inline bool config_flag_value(const ConfigEntry& entry) {
    std::string v = entry.value;
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config value for '" + entry.key + "' is not a boolean: '" + entry.value +
                                "'");
}

// Turns config entries into command-line tokens for the options the command
// line itself did not set. The tokens re-enter the normal parse, so config
// values get the same conversions and checks as flags.
inline std::vector<std::string> config_injections(const CLI::App& sub,
                                                  const std::vector<ConfigEntry>& entries) {
    std::vector<std::string> extra;
    for (const auto& entry : entries) {
        if (entry.key == "config") {
            throw std::invalid_argument("config file cannot set 'config'");
        }
        const auto* opt = sub.get_option_no_throw("--" + entry.key);
        if (opt == nullptr) {
            throw std::invalid_argument("config file names an unknown option '" + entry.key +
                                        "' for command '" + sub.get_name() + "'");
        }
        if (opt->count() > 0) continue;  // the command line wins
        if (opt->get_expected_min() == 0) {
            if (config_flag_value(entry)) extra.push_back("--" + entry.key);
        } else {
            extra.push_back("--" + entry.key + "=" + entry.value);
        }
    }
    return extra;
}

inline int run(int argc, char** argv) {
    // CLI11's vector parse consumes tokens from the back, so the token list
    // is kept reversed throughout.
    std::vector<std::string> tokens;
    for (int i = argc - 1; i >= 1; --i) tokens.emplace_back(argv[i]);

    for (int pass = 0;; ++pass) {
        CLI::App app{"item-level rating disagreement toolkit"};
        CliOptions o;
        const auto subs = register_commands(app, o);
        auto args = tokens;
        try {
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }
        CLI::App* active = subs.active();
        try {
            if (pass == 0 && !o.config_path.empty()) {
                const auto extra = config_injections(*active, parse_config_file(o.config_path));
                if (!extra.empty()) {
                    // Reversed token list: prepending puts the injected
                    // options at the end of the command line, still inside
                    // the active subcommand.
                    tokens.insert(tokens.begin(), extra.rbegin(), extra.rend());
                    continue;
                }
            }
            if (active == subs.synth) return run_synth(o.synth);
            if (active == subs.ingest) return run_ingest(o.ingest);
            if (active == subs.train) return run_train(o.train);
            if (active == subs.experiment) return run_experiment_cmd(o.experiment);
            return run_analyze(o.analyze);
        } catch (const std::invalid_argument& e) {
            return fail(active->get_name(), e.what(), 2);
        } catch (const std::exception& e) {
            return fail(active->get_name(), e.what(), 3);
        }
    }
}

}  // namespace likert::cli
