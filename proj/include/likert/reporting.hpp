#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "likert/eval.hpp"
#include "likert/losses.hpp"
#include "likert/trainer.hpp"

namespace likert {

inline nlohmann::ordered_json loss_kind_json(const LossKind& loss) {
    nlohmann::ordered_json j;
    j["kind"] = loss_tag_name(loss.tag);
    if (loss.tag == LossTag::EMD_MSE) j["lambda_mean"] = loss.lambda_mean;
    if (loss.tag == LossTag::EMD || loss.tag == LossTag::EMD_MSE) j["emd_power"] = loss.emd_power;
    return j;
}

inline nlohmann::ordered_json eval_report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["var_mse"] = report.var_mse;
    j["var_spearman"] = report.var_spearman;
    j["disagree_f1"] = report.disagree_f1;
    j["threshold_used"] = report.threshold_used;
    j["disagree_degenerate"] = report.disagree_degenerate;
    j["n_items"] = report.n_items;
    return j;
}

inline nlohmann::ordered_json metric_aggregate_json(const MetricAggregate& agg) {
    nlohmann::ordered_json j;
    j["mean"] = agg.mean;
    j["stddev"] = agg.stddev;
    j["values"] = agg.values;
    j["single_seed"] = agg.single_seed;
    return j;
}

inline nlohmann::ordered_json run_outcome_json(const RunOutcome& run) {
    nlohmann::ordered_json j;
    j["loss"] = loss_kind_json(run.loss);
    j["seed"] = run.seed;
    j["best_epoch"] = run.train_result.best_epoch;
    j["epochs"] = run.train_result.history.size();
    nlohmann::ordered_json history = nlohmann::ordered_json::array();
    for (const auto& e : run.train_result.history) {
        history.push_back({{"train", e.train_metric}, {"validation", e.validation_metric}});
    }
    j["history"] = history;
    j["test"] = eval_report_json(run.test_report);
    return j;
}

inline nlohmann::ordered_json experiment_report_json(const ExperimentReport& report) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& run : report.runs) runs.push_back(run_outcome_json(run));
    j["runs"] = runs;
    nlohmann::ordered_json aggregates = nlohmann::ordered_json::array();
    for (const auto& agg : report.aggregates) {
        nlohmann::ordered_json a;
        a["loss"] = loss_kind_json(agg.loss);
        a["var_mse"] = metric_aggregate_json(agg.var_mse);
        a["var_spearman"] = metric_aggregate_json(agg.var_spearman);
        a["disagree_f1"] = metric_aggregate_json(agg.disagree_f1);
        aggregates.push_back(std::move(a));
    }
    j["aggregates"] = aggregates;
    return j;
}

namespace detail {

inline std::string csv_number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace detail

// One row per loss kind with the three headline metrics as mean and sample
// standard deviation across seeds.
inline std::string experiment_report_csv(const ExperimentReport& report) {
    std::string out =
        "loss,var_mse_mean,var_mse_std,var_spearman_mean,var_spearman_std,"
        "disagree_f1_mean,disagree_f1_std\n";
    for (const auto& agg : report.aggregates) {
        out += loss_tag_name(agg.loss.tag);
        for (const auto* m : {&agg.var_mse, &agg.var_spearman, &agg.disagree_f1}) {
            out += ',';
            out += detail::csv_number(m->mean);
            out += ',';
            out += detail::csv_number(m->stddev);
        }
        out += '\n';
    }
    return out;
}

inline std::string bin_table_csv(const BinTable& table) {
    std::string out = "bin_lo,bin_hi,count,mean_target,mean_pred,std_pred\n";
    for (std::size_t b = 0; b < table.rows.size(); ++b) {
        const auto& row = table.rows[b];
        out += detail::csv_number(table.edges[b]);
        out += ',';
        out += detail::csv_number(table.edges[b + 1]);
        out += ',';
        out += std::to_string(row.count);
        for (double v : {row.mean_target, row.mean_pred, row.std_pred}) {
            out += ',';
            out += std::isnan(v) ? std::string("nan") : detail::csv_number(v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace likert
