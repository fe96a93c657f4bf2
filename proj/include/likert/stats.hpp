#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "likert/scale.hpp"

namespace likert {

// Empirical distribution over rating options: p_k = count(k) / N.
inline LikertDistribution build_distribution(const ItemAnnotations& item, const RatingScale& scale) {
    item.validate(scale);
    LikertDistribution dist;
    dist.p.assign(static_cast<std::size_t>(scale.k), 0.0);
    const double w = 1.0 / static_cast<double>(item.ratings.size());
    for (int r : item.ratings) {
        dist.p[static_cast<std::size_t>(r)] += w;
    }
    return dist;
}

// Sample variance of the raw ratings with Bessel's correction. Ratings are
// integers, so the sums are accumulated exactly; the result is identical for
// any permutation of the input.
inline double unbiased_variance(const std::vector<int>& ratings) {
    if (ratings.size() < 2) {
        throw std::invalid_argument("unbiased_variance: variance undefined for fewer than 2 ratings");
    }
    const auto n = static_cast<long long>(ratings.size());
    long long sum = 0;
    long long sumsq = 0;
    for (int r : ratings) {
        sum += r;
        sumsq += static_cast<long long>(r) * r;
    }
    const long double numerator =
        static_cast<long double>(n) * static_cast<long double>(sumsq) -
        static_cast<long double>(sum) * static_cast<long double>(sum);
    return static_cast<double>(numerator / (static_cast<long double>(n) * static_cast<long double>(n - 1)));
}

inline double rating_mean(const std::vector<int>& ratings) {
    if (ratings.empty()) throw std::invalid_argument("rating_mean: no annotations");
    double s = 0.0;
    for (int r : ratings) s += static_cast<double>(r);
    return s / static_cast<double>(ratings.size());
}

// Mean of a distribution over options 0..K-1.
inline double distribution_mean(const LikertDistribution& dist) {
    dist.validate();
    double mu = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        mu += dist.p[k] * static_cast<double>(k);
    }
    return mu;
}

// Variance of a distribution over options 0..K-1 (population form).
inline double distribution_variance(const LikertDistribution& dist) {
    dist.validate();
    const double mu = [&] {
        double m = 0.0;
        for (std::size_t k = 0; k < dist.size(); ++k) m += dist.p[k] * static_cast<double>(k);
        return m;
    }();
    double var = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        const double d = static_cast<double>(k) - mu;
        var += dist.p[k] * d * d;
    }
    return var;
}

// Largest value unbiased_variance can take on a K-point scale
// (two ratings at the extremes: {0, K-1}).
inline double max_unbiased_variance(const RatingScale& scale) {
    scale.validate();
    const double r = static_cast<double>(scale.k - 1);
    return r * r / 2.0;
}

// Largest value distribution_variance can take on a K-point scale
// (half the mass on each extreme).
inline double max_distribution_variance(const RatingScale& scale) {
    scale.validate();
    const double r = static_cast<double>(scale.k - 1);
    return r * r / 4.0;
}

// Default band layout: options below the scale midpoint are "low", options
// above it are "high", and for odd K the exact midpoint forms the middle band.
inline OppositionSegmentation default_segmentation(const RatingScale& scale) {
    scale.validate();
    OppositionSegmentation seg;
    const double midpoint = static_cast<double>(scale.k - 1) / 2.0;
    for (int r = 0; r < scale.k; ++r) {
        const double x = static_cast<double>(r);
        if (x < midpoint) {
            seg.low.push_back(r);
        } else if (x > midpoint) {
            seg.high.push_back(r);
        } else {
            seg.mid.push_back(r);
        }
    }
    return seg;
}

// Degree to which mass concentrates on opposite ends of the scale:
//   2 * min(P_low, P_high) * (1 - P_mid)
// 0 when either end is empty, 1 when mass splits evenly across the two
// ends with nothing in the middle. Clamped to [0, 1] against rounding.
inline double opposition_index(const LikertDistribution& dist, const OppositionSegmentation& seg) {
    dist.validate();
    RatingScale scale{static_cast<int>(dist.size())};
    seg.validate(scale);
    // Addends are summed in sorted order so the band mass depends only on
    // the multiset of probabilities; mirroring a distribution then yields
    // bit-identical index values.
    auto mass = [&](const std::vector<int>& band) {
        std::vector<double> vals;
        vals.reserve(band.size());
        for (int r : band) vals.push_back(dist.p[static_cast<std::size_t>(r)]);
        std::sort(vals.begin(), vals.end());
        double m = 0.0;
        for (double v : vals) m += v;
        return m;
    };
    const double p_low = mass(seg.low);
    const double p_mid = mass(seg.mid);
    const double p_high = mass(seg.high);
    const double index = 2.0 * std::min(p_low, p_high) * (1.0 - p_mid);
    return std::clamp(index, 0.0, 1.0);
}

inline double opposition_index(const LikertDistribution& dist) {
    return opposition_index(dist, default_segmentation(RatingScale{static_cast<int>(dist.size())}));
}

}  // namespace likert
