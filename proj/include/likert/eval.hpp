#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace likert {

// Mean squared error between two aligned value lists.
inline double var_mse(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("var_mse: length mismatch");
    if (pred.empty()) throw std::invalid_argument("var_mse: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        total += d * d;
    }
    return total / static_cast<double>(pred.size());
}

namespace detail {

// Average ranks (1-based), ties receiving the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_rank = static_cast<double>(i + j) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) {
        throw std::invalid_argument("pearson: correlation undefined for constant input");
    }
    return cov / std::sqrt(va * vb);
}

}  // namespace detail

// Rank correlation with tie-averaged ranks.
inline double spearman(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("spearman: length mismatch");
    if (pred.size() < 2) throw std::invalid_argument("spearman: needs at least 2 pairs");
    try {
        return detail::pearson(detail::average_ranks(pred), detail::average_ranks(target));
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("spearman: correlation undefined for constant input");
    }
}

struct DisagreeF1Result {
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool degenerate = false;  // no positives anywhere, F1 = 1 by convention
};

// F1 of "this item has any rating disagreement": positives are items with
// target variance > 0, predictions binarized at `threshold`.
inline DisagreeF1Result disagree_f1_detailed(const std::vector<double>& pred_var,
                                             const std::vector<double>& target_var, double threshold) {
    if (pred_var.size() != target_var.size()) throw std::invalid_argument("disagree_f1: length mismatch");
    if (pred_var.empty()) throw std::invalid_argument("disagree_f1: empty input");
    if (!std::isfinite(threshold)) throw std::invalid_argument("disagree_f1: threshold must be finite");
    DisagreeF1Result r;
    for (std::size_t i = 0; i < pred_var.size(); ++i) {
        const bool actual = target_var[i] > 0.0;
        const bool predicted = pred_var[i] > threshold;
        if (actual && predicted) {
            ++r.tp;
        } else if (!actual && predicted) {
            ++r.fp;
        } else if (actual && !predicted) {
            ++r.fn;
        } else {
            ++r.tn;
        }
    }
    if (r.tp == 0 && r.fp == 0 && r.fn == 0) {
        r.f1 = 1.0;
        r.degenerate = true;
    } else if (r.tp == 0) {
        r.f1 = 0.0;
    } else {
        r.f1 = 2.0 * static_cast<double>(r.tp) /
               (2.0 * static_cast<double>(r.tp) + static_cast<double>(r.fp) + static_cast<double>(r.fn));
    }
    return r;
}

inline double disagree_f1(const std::vector<double>& pred_var, const std::vector<double>& target_var,
                          double threshold) {
    return disagree_f1_detailed(pred_var, target_var, threshold).f1;
}

// Scans candidate cut points (below the smallest prediction, the midpoints
// between adjacent distinct predictions, above the largest) and returns the
// F1-maximizing threshold; ties go to the smaller candidate.
inline double calibrate_threshold(const std::vector<double>& pred_var, const std::vector<double>& target_var) {
    if (pred_var.empty() || pred_var.size() != target_var.size()) {
        throw std::invalid_argument("calibrate_threshold: empty or mismatched input");
    }
    std::vector<double> uniq = pred_var;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double> candidates;
    candidates.push_back(uniq.front() - 1.0);
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    }
    candidates.push_back(uniq.back() + 1.0);

    double best_threshold = candidates.front();
    double best_f1 = -1.0;
    for (double c : candidates) {
        const double f1 = disagree_f1(pred_var, target_var, c);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_threshold = c;
        }
    }
    return best_threshold;
}

struct BinRow {
    std::size_t count = 0;
    double mean_target = std::numeric_limits<double>::quiet_NaN();
    double mean_pred = std::numeric_limits<double>::quiet_NaN();
    double std_pred = std::numeric_limits<double>::quiet_NaN();
};

struct BinTable {
    std::vector<double> edges;  // size bins + 1, strictly increasing
    std::vector<BinRow> rows;
};

inline std::vector<double> equal_width_edges(double lo, double hi, int bins) {
    if (bins < 1) throw std::invalid_argument("equal_width_edges: need at least 1 bin");
    if (!(hi > lo)) throw std::invalid_argument("equal_width_edges: hi must exceed lo");
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) {
        edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    return edges;
}

// Groups items into half-open target bins [lo, hi) (last bin closed) and
// reports per-bin averages of target and prediction.
inline BinTable bin_analysis(const std::vector<double>& target, const std::vector<double>& pred,
                             const std::vector<double>& edges) {
    if (target.size() != pred.size()) throw std::invalid_argument("bin_analysis: length mismatch");
    if (target.empty()) throw std::invalid_argument("bin_analysis: empty input");
    if (edges.size() < 2) throw std::invalid_argument("bin_analysis: need at least 2 edges");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i] < edges[i + 1])) {
            throw std::invalid_argument("bin_analysis: edges must be strictly increasing");
        }
    }
    const std::size_t bins = edges.size() - 1;
    std::vector<std::vector<std::size_t>> members(bins);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double v = target[i];
        if (v < edges.front() || v > edges.back()) {
            throw std::invalid_argument("bin_analysis: target value outside bin edges");
        }
        std::size_t b = bins - 1;  // values at the top edge land in the closed last bin
        for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
            if (v >= edges[j] && v < edges[j + 1]) {
                b = j;
                break;
            }
        }
        members[b].push_back(i);
    }
    BinTable table;
    table.edges = edges;
    table.rows.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        auto& row = table.rows[b];
        row.count = members[b].size();
        if (row.count == 0) continue;
        double st = 0.0, sp = 0.0;
        for (std::size_t i : members[b]) {
            st += target[i];
            sp += pred[i];
        }
        row.mean_target = st / static_cast<double>(row.count);
        row.mean_pred = sp / static_cast<double>(row.count);
        if (row.count >= 2) {
            double ss = 0.0;
            for (std::size_t i : members[b]) {
                const double d = pred[i] - row.mean_pred;
                ss += d * d;
            }
            row.std_pred = std::sqrt(ss / static_cast<double>(row.count - 1));
        } else {
            row.std_pred = 0.0;
        }
    }
    return table;
}

struct EvalReport {
    double var_mse = 0.0;
    double var_spearman = 0.0;
    double disagree_f1 = 0.0;
    double threshold_used = 0.0;
    bool disagree_degenerate = false;
    std::size_t n_items = 0;
};

// Bundles the three headline metrics; the disagreement threshold is chosen
// by the caller (normally calibrated on validation predictions).
inline EvalReport evaluate_variance_predictions(const std::vector<double>& pred_var,
                                                const std::vector<double>& target_var, double threshold) {
    EvalReport report;
    report.var_mse = var_mse(pred_var, target_var);
    report.var_spearman = spearman(pred_var, target_var);
    const auto f1 = disagree_f1_detailed(pred_var, target_var, threshold);
    report.disagree_f1 = f1.f1;
    report.disagree_degenerate = f1.degenerate;
    report.threshold_used = threshold;
    report.n_items = pred_var.size();
    return report;
}

}  // namespace likert
