#include "catch_amalgamated.hpp"

#include <cmath>
#include <vector>

#include "likert/eval.hpp"
#include "likert/rng.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("mean squared error", "[eval]") {
    REQUIRE(likert::var_mse({0.3, 0.7}, {0.3, 0.7}) == 0.0);
    REQUIRE_THAT(likert::var_mse({0.0, 1.0}, {1.0, 0.0}), WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(likert::var_mse({0.5}, {1.2}), WithinAbs(0.49, 1e-12));
    REQUIRE_THROWS_AS(likert::var_mse({0.1}, {0.1, 0.2}), std::invalid_argument);
    REQUIRE_THROWS_AS(likert::var_mse({}, {}), std::invalid_argument);

    likert::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(10), b(10);
        for (auto& v : a) v = rng.uniform(0.0, 4.0);
        for (auto& v : b) v = rng.uniform(0.0, 4.0);
        REQUIRE(likert::var_mse(a, b) == likert::var_mse(b, a));
    }
}

TEST_CASE("rank correlation witnesses", "[eval]") {
    REQUIRE_THAT(likert::spearman({1, 2, 3, 4}, {10, 20, 30, 40}), WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(likert::spearman({1, 2, 3, 4}, {40, 30, 20, 10}), WithinAbs(-1.0, 1e-12));

    const double tied = likert::spearman({1, 2, 2, 4}, {1, 2, 3, 4});
    REQUIRE_THAT(tied, WithinAbs(0.9487, 1e-4));
    REQUIRE_THAT(tied, WithinAbs(3.0 / std::sqrt(10.0), 1e-12));

    REQUIRE_THROWS_WITH(likert::spearman({1, 1, 1}, {1, 2, 3}), ContainsSubstring("correlation undefined"));
    REQUIRE_THROWS_WITH(likert::spearman({1, 2, 3}, {2, 2, 2}), ContainsSubstring("correlation undefined"));
    REQUIRE_THROWS_AS(likert::spearman({1}, {1}), std::invalid_argument);
}

TEST_CASE("rank correlation ignores monotone transforms", "[eval]") {
    likert::Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(20), b(20);
        for (auto& v : a) v = rng.uniform(0.0, 4.0);
        for (auto& v : b) v = rng.uniform(0.0, 4.0);
        const double base = likert::spearman(a, b);
        auto a_cubed = a;
        for (auto& v : a_cubed) v = v * v * v;
        auto b_exp = b;
        for (auto& v : b_exp) v = std::exp(v);
        REQUIRE(likert::spearman(a_cubed, b) == base);
        REQUIRE(likert::spearman(a, b_exp) == base);
    }
}

TEST_CASE("disagreement F1 witnesses", "[eval]") {
    // Perfect separation.
    REQUIRE(likert::disagree_f1({0.0, 0.0, 1.5, 2.0}, {0.0, 0.0, 0.5, 1.2}, 0.5) == 1.0);

    // Everything flagged positive, half the targets actually positive.
    REQUIRE_THAT(likert::disagree_f1({1.0, 1.0, 1.0, 1.0}, {0.0, 0.0, 0.5, 1.2}, 0.5),
                 WithinAbs(2.0 / 3.0, 1e-12));

    // All targets positive and the threshold below every prediction.
    REQUIRE(likert::disagree_f1({0.3, 0.8}, {0.5, 1.2}, 0.1) == 1.0);

    // No positives anywhere: 1 by convention, flagged.
    auto degenerate = likert::disagree_f1_detailed({0.0, 0.0}, {0.0, 0.0}, 0.5);
    REQUIRE(degenerate.f1 == 1.0);
    REQUIRE(degenerate.degenerate);

    // Misses only.
    REQUIRE(likert::disagree_f1({0.0, 0.0}, {1.0, 2.0}, 0.5) == 0.0);
}

TEST_CASE("raising the threshold never raises recall", "[eval]") {
    likert::Rng rng(909);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> pred(30), target(30);
        for (auto& v : pred) v = rng.uniform(0.0, 2.0);
        for (auto& v : target) v = rng.uniform() < 0.4 ? 0.0 : rng.uniform(0.0, 2.0);
        double prev_recall = 2.0;
        for (double t : {0.2, 0.5, 0.8, 1.1, 1.4}) {
            auto r = likert::disagree_f1_detailed(pred, target, t);
            const double denom = static_cast<double>(r.tp + r.fn);
            const double recall = denom > 0.0 ? static_cast<double>(r.tp) / denom : 1.0;
            REQUIRE(recall <= prev_recall + 1e-15);
            prev_recall = recall;
        }
    }
}

TEST_CASE("threshold calibration", "[eval]") {
    REQUIRE_THAT(likert::calibrate_threshold({0.1, 0.9}, {0.0, 1.0}), WithinAbs(0.5, 1e-12));

    // All targets positive: the winning cut sits below every prediction.
    const double t = likert::calibrate_threshold({0.3, 0.8, 1.1}, {0.5, 0.7, 1.2});
    REQUIRE(t < 0.3);

    const auto preds = std::vector<double>{0.4, 0.1, 0.9, 0.4};
    const auto targets = std::vector<double>{0.0, 0.0, 1.0, 1.0};
    REQUIRE(likert::calibrate_threshold(preds, targets) == likert::calibrate_threshold(preds, targets));

    REQUIRE_THROWS_AS(likert::calibrate_threshold({}, {}), std::invalid_argument);

    // The calibrated threshold is optimal over a dense reference scan.
    likert::Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> p(25), g(25);
        for (auto& v : p) v = rng.uniform(0.0, 2.0);
        for (auto& v : g) v = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 2.0);
        const double chosen = likert::calibrate_threshold(p, g);
        const double chosen_f1 = likert::disagree_f1(p, g, chosen);
        for (double probe = -0.1; probe < 2.1; probe += 0.01) {
            REQUIRE(likert::disagree_f1(p, g, probe) <= chosen_f1 + 1e-12);
        }
    }
}

TEST_CASE("bin edges helper", "[eval]") {
    auto edges = likert::equal_width_edges(0.0, 8.0, 6);
    REQUIRE(edges.size() == 7);
    REQUIRE(edges.front() == 0.0);
    REQUIRE(edges.back() == 8.0);
    REQUIRE_THROWS_AS(likert::equal_width_edges(1.0, 1.0, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(likert::equal_width_edges(0.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("bin analysis basics", "[eval]") {
    const std::vector<double> target{0.1, 0.2, 0.15, 0.12};
    const std::vector<double> pred{0.3, 0.4, 0.2, 0.1};
    auto table = likert::bin_analysis(target, pred, {0.0, 0.5, 1.0});
    REQUIRE(table.rows.size() == 2);
    REQUIRE(table.rows[0].count == 4);
    REQUIRE(table.rows[1].count == 0);
    REQUIRE(std::isnan(table.rows[1].mean_target));
    REQUIRE_THAT(table.rows[0].mean_target, WithinAbs((0.1 + 0.2 + 0.15 + 0.12) / 4.0, 1e-12));
    REQUIRE_THAT(table.rows[0].mean_pred, WithinAbs(0.25, 1e-12));
}

TEST_CASE("bin analysis boundaries and validation", "[eval]") {
    // Top-edge value lands in the closed last bin; interior edges open above.
    auto table = likert::bin_analysis({0.0, 0.5, 1.0}, {1.0, 2.0, 3.0}, {0.0, 0.5, 1.0});
    REQUIRE(table.rows[0].count == 1);
    REQUIRE(table.rows[1].count == 2);

    REQUIRE_THROWS_WITH(likert::bin_analysis({1.5}, {0.0}, {0.0, 1.0}), ContainsSubstring("outside"));
    REQUIRE_THROWS_AS(likert::bin_analysis({0.5}, {0.0}, {0.0, 0.0, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(likert::bin_analysis({0.5}, {0.0, 0.1}, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("bin analysis properties", "[eval]") {
    likert::Rng rng(222);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 40;
        std::vector<double> target(n), pred(n);
        for (auto& v : target) v = rng.uniform(0.0, 4.0);
        for (auto& v : pred) v = rng.uniform(0.0, 4.0);
        auto table = likert::bin_analysis(target, pred, likert::equal_width_edges(0.0, 4.0, 5));
        std::size_t total = 0;
        for (std::size_t b = 0; b < table.rows.size(); ++b) {
            const auto& row = table.rows[b];
            total += row.count;
            if (row.count > 0) {
                REQUIRE(row.mean_target >= table.edges[b] - 1e-12);
                REQUIRE(row.mean_target <= table.edges[b + 1] + 1e-12);
                REQUIRE(row.std_pred >= 0.0);
            }
        }
        REQUIRE(total == n);

        auto self = likert::bin_analysis(target, target, likert::equal_width_edges(0.0, 4.0, 5));
        for (const auto& row : self.rows) {
            if (row.count > 0) REQUIRE(row.mean_target == row.mean_pred);
        }
    }
}

TEST_CASE("headline metric bundle", "[eval]") {
    const std::vector<double> pred{0.1, 0.8, 0.3, 1.2};
    const std::vector<double> target{0.0, 1.0, 0.4, 1.5};
    auto report = likert::evaluate_variance_predictions(pred, target, 0.2);
    REQUIRE(report.n_items == 4);
    REQUIRE(report.threshold_used == 0.2);
    REQUIRE(report.var_mse == likert::var_mse(pred, target));
    REQUIRE(report.var_spearman == likert::spearman(pred, target));
    REQUIRE(report.disagree_f1 == likert::disagree_f1(pred, target, 0.2));
    REQUIRE_FALSE(report.disagree_degenerate);
}
