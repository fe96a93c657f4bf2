#pragma once

#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "likert/losses.hpp"
#include "likert/scale.hpp"
#include "likert/stats.hpp"

namespace likert {

// One training example: frozen text features plus every target the loss
// kinds can train against.
struct DatasetItem {
    std::string id;
    std::vector<double> features;
    LikertDistribution target_dist;  // empirical rating distribution
    double target_var = 0.0;         // sample variance of the raw ratings
    double target_binary = 0.0;      // upper-half rating mass
    std::vector<int> ratings;
};

struct Dataset {
    RatingScale scale;
    int feature_dim = 0;
    std::vector<DatasetItem> items;

    void validate() const {
        scale.validate();
        if (feature_dim <= 0) throw std::invalid_argument("Dataset: feature_dim must be positive");
        std::unordered_set<std::string> seen;
        for (const auto& item : items) {
            if (!seen.insert(item.id).second) {
                throw std::invalid_argument("Dataset: duplicate item id '" + item.id + "'");
            }
            if (item.features.size() != static_cast<std::size_t>(feature_dim)) {
                throw std::invalid_argument("Dataset: item '" + item.id + "' feature length mismatch");
            }
            if (item.target_dist.size() != static_cast<std::size_t>(scale.k)) {
                throw std::invalid_argument("Dataset: item '" + item.id + "' target distribution K mismatch");
            }
        }
    }
};

// Assembles a training-ready item from raw annotations and its feature
// vector. Variance targets need at least two ratings.
inline DatasetItem make_dataset_item(const ItemAnnotations& ann, const RatingScale& scale,
                                     std::vector<double> features) {
    ann.validate(scale);
    if (ann.ratings.size() < 2) {
        throw std::invalid_argument("make_dataset_item: item '" + ann.id +
                                    "' variance undefined with a single rating");
    }
    DatasetItem item;
    item.id = ann.id;
    item.features = std::move(features);
    item.target_dist = build_distribution(ann, scale);
    item.target_var = unbiased_variance(ann.ratings);
    item.target_binary = aggregate_binary(item.target_dist);
    item.ratings = ann.ratings;
    return item;
}

}  // namespace likert
