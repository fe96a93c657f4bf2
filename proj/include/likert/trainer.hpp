#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "likert/dataset.hpp"
#include "likert/eval.hpp"
#include "likert/losses.hpp"
#include "likert/model.hpp"
#include "likert/rng.hpp"
#include "likert/split.hpp"

namespace likert {

enum class Optimizer { Adam, Sgd };

inline const char* optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(const std::string& name) {
    if (name == "adam") return Optimizer::Adam;
    if (name == "sgd") return Optimizer::Sgd;
    throw std::invalid_argument("unknown optimizer: " + name);
}

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 200;
    int patience = 5;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
            throw std::invalid_argument("TrainConfig: learning_rate must be positive");
        }
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be at least 1");
        if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be at least 1");
        if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be at least 1");
    }
};

struct EpochStats {
    double train_metric = 0.0;
    double validation_metric = 0.0;
};

struct TrainResult {
    MlpParams best_params;
    int best_epoch = 0;  // 1-based index into history
    std::vector<EpochStats> history;
};

// Which head a loss kind trains.
inline HeadTag required_head(LossTag tag) {
    if (is_distribution_loss(tag)) return HeadTag::Distribution;
    return tag == LossTag::VAR_REG ? HeadTag::ScalarNonNeg : HeadTag::BinaryProb;
}

// Training target for one item under a loss kind.
inline std::vector<double> loss_target(const DatasetItem& item, LossTag tag) {
    if (is_distribution_loss(tag)) return item.target_dist.p;
    if (tag == LossTag::VAR_REG) return {item.target_var};
    return {item.target_binary};
}

// Model config for a loss kind on a given dataset, sharing trunk shape.
inline ModelConfig model_config_for(const Dataset& ds, LossTag tag, const std::vector<int>& hidden_dims,
                                    Activation activation) {
    ModelConfig cfg;
    cfg.input_dim = ds.feature_dim;
    cfg.hidden_dims = hidden_dims;
    cfg.activation = activation;
    cfg.head = HeadKind{required_head(tag), ds.scale.k};
    return cfg;
}

namespace detail {

struct AdamState {
    MlpParams m;
    MlpParams v;
    long long t = 0;
};

inline void optimizer_step(MlpParams& params, const MlpParams& grads, Optimizer opt, double lr,
                           AdamState& state) {
    if (opt == Optimizer::Sgd) {
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            auto& p = params.layers[l];
            const auto& g = grads.layers[l];
            for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] -= lr * g.w[i];
            for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] -= lr * g.b[i];
        }
        return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        const auto& g = grads.layers[l];
        auto& m = state.m.layers[l];
        auto& v = state.v.layers[l];
        auto update = [&](std::vector<double>& theta, const std::vector<double>& grad, std::vector<double>& m1,
                          std::vector<double>& v1) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m1[i] = b1 * m1[i] + (1.0 - b1) * grad[i];
                v1[i] = b2 * v1[i] + (1.0 - b2) * grad[i] * grad[i];
                theta[i] -= lr * (m1[i] / bc1) / (std::sqrt(v1[i] / bc2) + eps);
            }
        };
        update(p.w, g.w, m.w, v.w);
        update(p.b, g.b, m.b, v.b);
    }
}

inline void scale_params(MlpParams& p, double factor) {
    for (auto& layer : p.layers) {
        for (auto& w : layer.w) w *= factor;
        for (auto& b : layer.b) b *= factor;
    }
}

inline void zero_params(MlpParams& p) {
    for (auto& layer : p.layers) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
}

}  // namespace detail

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace detail

// Mean loss of `kind` over the given items with fixed parameters.
inline double mean_loss(const MlpParams& params, const ModelConfig& cfg, const Dataset& ds,
                        const std::vector<std::size_t>& indices, const LossKind& kind) {
    if (indices.empty()) throw std::invalid_argument("mean_loss: empty split");
    double total = 0.0;
    for (std::size_t idx : indices) {
        const auto& item = ds.items[idx];
        const auto out = forward(params, cfg, item.features);
        total += compute_loss(kind, out, loss_target(item, kind.tag)).value;
    }
    return total / static_cast<double>(indices.size());
}

// Mini-batch training with early stopping on the validation value of the
// training objective. Deterministic per (configs, seed).
inline TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg, const Dataset& ds,
                         const SplitAssignment& split, const LossKind& loss) {
    model_cfg.validate();
    train_cfg.validate();
    loss.validate();
    ds.validate();
    if (split.train.empty() || split.validation.empty()) {
        throw std::invalid_argument("train: empty split");
    }
    if (model_cfg.head.tag != required_head(loss.tag)) {
        throw std::invalid_argument(std::string("train: loss '") + loss_tag_name(loss.tag) +
                                    "' does not match head '" + head_tag_name(model_cfg.head.tag) + "'");
    }
    if (model_cfg.head.tag == HeadTag::Distribution && model_cfg.head.k != ds.scale.k) {
        throw std::invalid_argument("train: head K does not match dataset scale");
    }

    MlpParams params = init_params(model_cfg, derive_seed(train_cfg.seed, 0x494e4954ULL));  // "INIT"
    detail::AdamState adam{zeros_like(params), zeros_like(params), 0};
    MlpParams grads = zeros_like(params);

    auto diverged = [&](int epoch) {
        return std::runtime_error(std::string("train: loss '") + loss_tag_name(loss.tag) + "' seed " +
                                  std::to_string(train_cfg.seed) + " diverged at epoch " +
                                  std::to_string(epoch));
    };

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;

    std::vector<std::size_t> order = split.train;
    for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(derive_seed(train_cfg.seed, 0x45504f4348ULL),  // "EPOCH"
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t at = 0;
        while (at < order.size()) {
            const std::size_t batch_end = std::min(at + static_cast<std::size_t>(train_cfg.batch_size),
                                                   order.size());
            detail::zero_params(grads);
            for (std::size_t i = at; i < batch_end; ++i) {
                const auto& item = ds.items[order[i]];
                auto trace = forward_trace(params, model_cfg, item.features);
                if (!detail::all_finite(trace.output)) throw diverged(epoch);
                auto eval = compute_loss(loss, trace.output, loss_target(item, loss.tag));
                if (!std::isfinite(eval.value)) throw diverged(epoch);
                epoch_loss += eval.value;
                backward_accumulate(params, model_cfg, trace, eval.grad, grads);
            }
            detail::scale_params(grads, 1.0 / static_cast<double>(batch_end - at));
            detail::optimizer_step(params, grads, train_cfg.optimizer, train_cfg.learning_rate, adam);
            at = batch_end;
        }

        EpochStats stats;
        stats.train_metric = epoch_loss / static_cast<double>(order.size());
        double val_total = 0.0;
        for (std::size_t idx : split.validation) {
            const auto& item = ds.items[idx];
            const auto out = forward(params, model_cfg, item.features);
            if (!detail::all_finite(out)) throw diverged(epoch);
            val_total += compute_loss(loss, out, loss_target(item, loss.tag)).value;
        }
        stats.validation_metric = val_total / static_cast<double>(split.validation.size());
        if (!std::isfinite(stats.validation_metric)) throw diverged(epoch);
        result.history.push_back(stats);

        if (stats.validation_metric < best_val) {
            best_val = stats.validation_metric;
            result.best_epoch = epoch;
            result.best_params = params;
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement >= train_cfg.patience) break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Experiment protocol: per loss kind, resplit and retrain once per seed,
// then aggregate the test metrics as mean and sample standard deviation.

struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> values;
    bool single_seed = false;  // std carries no information from one seed
};

inline MetricAggregate aggregate_metric(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("aggregate_metric: no values");
    MetricAggregate agg;
    agg.values = values;
    for (double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    if (values.size() == 1) {
        agg.stddev = 0.0;
        agg.single_seed = true;
    } else {
        double ss = 0.0;
        for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
        agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return agg;
}

struct ExperimentPlan {
    std::vector<int> hidden_dims{256, 64};
    Activation activation = Activation::Relu;
    TrainConfig train;    // `seed` is ignored; the per-cell seed drives it
    SplitSpec split;      // `seed` is ignored; the per-cell seed drives it
    std::vector<LossKind> losses;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    unsigned jobs = 1;

    void validate() const {
        train.validate();
        split.validate();
        if (losses.empty()) throw std::invalid_argument("ExperimentPlan: no loss kinds");
        for (const auto& l : losses) l.validate();
        if (seeds.empty()) throw std::invalid_argument("ExperimentPlan: no seeds");
        if (jobs < 1) throw std::invalid_argument("ExperimentPlan: jobs must be at least 1");
    }
};

// One (loss kind, seed) cell of the grid.
struct RunOutcome {
    LossKind loss;
    std::uint64_t seed = 0;
    ModelConfig model_cfg;
    SplitAssignment split;
    TrainResult train_result;
    EvalReport test_report;
};

struct LossAggregate {
    LossKind loss;
    MetricAggregate var_mse;
    MetricAggregate var_spearman;
    MetricAggregate disagree_f1;
};

struct ExperimentReport {
    std::vector<RunOutcome> runs;        // grid order: losses outer, seeds inner
    std::vector<LossAggregate> aggregates;
};

// Trains one cell: split by seed, train, calibrate the disagreement
// threshold on validation, report test metrics.
inline RunOutcome run_cell(const Dataset& ds, const ExperimentPlan& plan, const LossKind& loss,
                           std::uint64_t seed) {
    RunOutcome out;
    out.loss = loss;
    out.seed = seed;
    out.model_cfg = model_config_for(ds, loss.tag, plan.hidden_dims, plan.activation);

    std::vector<std::string> ids;
    ids.reserve(ds.items.size());
    for (const auto& item : ds.items) ids.push_back(item.id);
    SplitSpec split_spec = plan.split;
    split_spec.seed = seed;
    out.split = make_splits(ids, split_spec);
    if (out.split.test.empty()) throw std::invalid_argument("run_cell: empty split");

    TrainConfig train_cfg = plan.train;
    train_cfg.seed = seed;
    out.train_result = train(out.model_cfg, train_cfg, ds, out.split, loss);

    auto predict_all = [&](const std::vector<std::size_t>& indices) {
        std::vector<double> preds;
        preds.reserve(indices.size());
        for (std::size_t idx : indices) {
            preds.push_back(predict_variance(out.train_result.best_params, out.model_cfg,
                                             ds.items[idx].features));
        }
        return preds;
    };
    auto targets_of = [&](const std::vector<std::size_t>& indices) {
        std::vector<double> t;
        t.reserve(indices.size());
        for (std::size_t idx : indices) t.push_back(ds.items[idx].target_var);
        return t;
    };

    const auto val_preds = predict_all(out.split.validation);
    const double threshold = calibrate_threshold(val_preds, targets_of(out.split.validation));
    out.test_report =
        evaluate_variance_predictions(predict_all(out.split.test), targets_of(out.split.test), threshold);
    return out;
}

inline ExperimentReport run_experiment(const Dataset& ds, const ExperimentPlan& plan) {
    plan.validate();
    ds.validate();
    ExperimentReport report;
    const std::size_t cells = plan.losses.size() * plan.seeds.size();
    report.runs.resize(cells);

    auto run_index = [&](std::size_t i) {
        const auto& loss = plan.losses[i / plan.seeds.size()];
        const auto seed = plan.seeds[i % plan.seeds.size()];
        report.runs[i] = run_cell(ds, plan, loss, seed);
    };

    const unsigned jobs = std::min<unsigned>(plan.jobs, static_cast<unsigned>(cells));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < cells; ++i) run_index(i);
    } else {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(jobs);
        for (unsigned w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < cells; i += jobs) run_index(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    for (std::size_t li = 0; li < plan.losses.size(); ++li) {
        std::vector<double> mse, rho, f1;
        for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
            const auto& cell = report.runs[li * plan.seeds.size() + si];
            mse.push_back(cell.test_report.var_mse);
            rho.push_back(cell.test_report.var_spearman);
            f1.push_back(cell.test_report.disagree_f1);
        }
        LossAggregate agg;
        agg.loss = plan.losses[li];
        agg.var_mse = aggregate_metric(mse);
        agg.var_spearman = aggregate_metric(rho);
        agg.disagree_f1 = aggregate_metric(f1);
        report.aggregates.push_back(std::move(agg));
    }
    return report;
}

}  // namespace likert
