#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "likert/rng.hpp"

namespace likert {

struct SplitSpec {
    double train = 0.50;
    double validation = 0.25;
    double test = 0.25;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(train > 0.0 && validation > 0.0 && test > 0.0)) {
            throw std::invalid_argument("SplitSpec: every ratio must be positive");
        }
        if (std::abs(train + validation + test - 1.0) > 1e-9) {
            throw std::invalid_argument("SplitSpec: ratios must sum to 1");
        }
    }
};

// Indices into the item list handed to make_splits.
struct SplitAssignment {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

// Partition sizes by largest remainder, ties resolved toward the earlier
// split (train, then validation, then test).
inline std::vector<std::size_t> split_sizes(std::size_t n, const SplitSpec& spec) {
    const double ratios[3] = {spec.train, spec.validation, spec.test};
    std::vector<std::size_t> sizes(3);
    double remainders[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double exact = ratios[s] * static_cast<double>(n);
        sizes[s] = static_cast<std::size_t>(std::floor(exact));
        remainders[s] = exact - std::floor(exact);
        assigned += sizes[s];
    }
    while (assigned < n) {
        int best = 0;
        for (int s = 1; s < 3; ++s) {
            if (remainders[s] > remainders[best]) best = s;
        }
        sizes[best] += 1;
        remainders[best] = -1.0;
        ++assigned;
    }
    return sizes;
}

// Disjoint covering split of item ids, deterministic per seed.
inline SplitAssignment make_splits(const std::vector<std::string>& item_ids, const SplitSpec& spec) {
    spec.validate();
    if (item_ids.empty()) throw std::invalid_argument("make_splits: no items");
    std::unordered_set<std::string> seen;
    for (const auto& id : item_ids) {
        if (!seen.insert(id).second) {
            throw std::invalid_argument("make_splits: duplicate item id '" + id + "'");
        }
    }
    std::vector<std::size_t> order(item_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(spec.seed, 0x53504c4954ULL));  // stream tag "SPLIT"
    rng.shuffle(order);

    const auto sizes = split_sizes(item_ids.size(), spec);
    SplitAssignment out;
    std::size_t at = 0;
    for (std::size_t i = 0; i < sizes[0]; ++i) out.train.push_back(order[at++]);
    for (std::size_t i = 0; i < sizes[1]; ++i) out.validation.push_back(order[at++]);
    for (std::size_t i = 0; i < sizes[2]; ++i) out.test.push_back(order[at++]);
    return out;
}

}  // namespace likert
