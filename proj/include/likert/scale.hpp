#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace likert {

inline constexpr double kNormalizationTol = 1e-9;

// A K-point ordinal rating scale. Ratings are integers 0..k-1.
struct RatingScale {
    int k = 5;

    void validate() const {
        if (k < 2) throw std::invalid_argument("RatingScale: k must be at least 2");
    }

    [[nodiscard]] bool contains(int rating) const { return rating >= 0 && rating < k; }
};

// Raw per-item annotations: one integer rating per annotator.
struct ItemAnnotations {
    std::string id;
    std::vector<int> ratings;

    void validate(const RatingScale& scale) const {
        scale.validate();
        if (ratings.empty()) {
            throw std::invalid_argument("ItemAnnotations: item '" + id + "' has no annotations");
        }
        for (int r : ratings) {
            if (!scale.contains(r)) {
                throw std::invalid_argument("ItemAnnotations: item '" + id + "' has rating out of scale: " +
                                            std::to_string(r));
            }
        }
    }
};

// A probability distribution over the K rating options.
struct LikertDistribution {
    std::vector<double> p;

    [[nodiscard]] std::size_t size() const { return p.size(); }
    double operator[](std::size_t i) const { return p[i]; }

    void validate() const {
        if (p.size() < 2) {
            throw std::invalid_argument("LikertDistribution: needs at least 2 options");
        }
        double total = 0.0;
        for (double v : p) {
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("LikertDistribution: entries must be finite and non-negative");
            }
            total += v;
        }
        if (std::abs(total - 1.0) > kNormalizationTol) {
            throw std::invalid_argument("LikertDistribution: probabilities must sum to 1");
        }
    }
};

// Partition of the scale into a low band, a high band, and an optional
// middle band, used to quantify mass sitting on opposite ends.
struct OppositionSegmentation {
    std::vector<int> low;
    std::vector<int> mid;
    std::vector<int> high;

    void validate(const RatingScale& scale) const {
        scale.validate();
        std::vector<int> seen(static_cast<std::size_t>(scale.k), 0);
        auto mark = [&](const std::vector<int>& band, const char* name) {
            for (int r : band) {
                if (!scale.contains(r)) {
                    throw std::invalid_argument(std::string("OppositionSegmentation: ") + name +
                                                " band has rating out of scale");
                }
                if (seen[static_cast<std::size_t>(r)]++) {
                    throw std::invalid_argument("OppositionSegmentation: bands must be disjoint");
                }
            }
        };
        mark(low, "low");
        mark(mid, "mid");
        mark(high, "high");
        for (int c : seen) {
            if (c == 0) throw std::invalid_argument("OppositionSegmentation: bands must cover the scale");
        }
        if (low.empty() || high.empty()) {
            throw std::invalid_argument("OppositionSegmentation: low and high bands must be non-empty");
        }
    }
};

}  // namespace likert
