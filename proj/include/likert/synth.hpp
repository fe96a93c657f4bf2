#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "likert/bytes.hpp"
#include "likert/dataset.hpp"
#include "likert/embedding_io.hpp"
#include "likert/rng.hpp"
#include "likert/scale.hpp"
#include "likert/stats.hpp"

namespace likert {

// Latent shapes the generator mixes over. Consensus shapes put all mass on
// one side of the scale midpoint, so their opposition index is exactly zero;
// polarized shapes split mass 0.5/0.5 across the outer bands, so theirs is
// exactly one.
enum class Profile { ConsensusLow, ConsensusMid, ConsensusHigh, Skewed, Polarized };

inline constexpr std::size_t kProfileCount = 5;

inline const char* profile_name(Profile p) {
    switch (p) {
        case Profile::ConsensusLow: return "consensus_low";
        case Profile::ConsensusMid: return "consensus_mid";
        case Profile::ConsensusHigh: return "consensus_high";
        case Profile::Skewed: return "skewed";
        case Profile::Polarized: return "polarized";
    }
    throw std::logic_error("profile_name: unreachable");
}

struct AnnotatorRange {
    int lo = 5;
    int hi = 5;
};

struct SynthConfig {
    int n_items = 1000;
    int k_levels = 5;
    AnnotatorRange annotators{};
    std::array<double, kProfileCount> mixture{0.15, 0.15, 0.15, 0.35, 0.20};
    double noise_temp = 0.1;
    int feature_dim = 16;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_items < 1) throw std::invalid_argument("SynthConfig: n_items must be positive");
        RatingScale{k_levels}.validate();
        if (annotators.lo < 2) {
            throw std::invalid_argument("SynthConfig: annotators.lo must be at least 2");
        }
        if (annotators.hi < annotators.lo) {
            throw std::invalid_argument("SynthConfig: annotators.hi must not be below annotators.lo");
        }
        double total = 0.0;
        for (double w : mixture) {
            if (!std::isfinite(w) || w < 0.0) {
                throw std::invalid_argument("SynthConfig: mixture weights must be finite and non-negative");
            }
            total += w;
        }
        if (std::abs(total - 1.0) > kNormalizationTol) {
            throw std::invalid_argument("SynthConfig: mixture weights must sum to 1");
        }
        if (!std::isfinite(noise_temp) || noise_temp <= 0.0) {
            throw std::invalid_argument("SynthConfig: noise_temp must be positive");
        }
        if (feature_dim < k_levels) {
            throw std::invalid_argument("SynthConfig: feature_dim must be at least k_levels");
        }
    }
};

struct SynthItem {
    std::string id;
    Profile profile = Profile::ConsensusLow;
    LikertDistribution latent;
    std::vector<double> features;
    std::vector<int> ratings;
};

inline std::vector<int> sample_annotations(const LikertDistribution& latent, int n, Rng& rng) {
    latent.validate();
    if (n < 1) throw std::invalid_argument("sample_annotations: n must be positive");
    std::vector<int> ratings(static_cast<std::size_t>(n));
    for (auto& r : ratings) r = static_cast<int>(rng.categorical(latent.p));
    return ratings;
}

inline std::vector<int> sample_annotations(const LikertDistribution& latent, int n, std::uint64_t seed) {
    Rng rng(seed);
    return sample_annotations(latent, n, rng);
}

namespace detail {

inline constexpr std::uint64_t kSynthFeatureStream = 0x46454154ULL;  // stream tag "FEAT"
inline constexpr std::uint64_t kSynthItemStream = 0x4954454dULL;     // stream tag "ITEM"

// Normalized bump exp(-((k-center)/sigma)^2 / 2) restricted to `low_side`
// of the midpoint (boundary bin included on both sides).
inline std::vector<double> one_sided_bump(int k_levels, bool low_side, double center, double sigma) {
    std::vector<double> p(static_cast<std::size_t>(k_levels), 0.0);
    double z = 0.0;
    for (int k = 0; k < k_levels; ++k) {
        const bool allowed = low_side ? (2 * k <= k_levels - 1) : (2 * k >= k_levels - 1);
        if (!allowed) continue;
        const double t = (static_cast<double>(k) - center) / sigma;
        p[static_cast<std::size_t>(k)] = std::exp(-0.5 * t * t);
        z += p[static_cast<std::size_t>(k)];
    }
    for (auto& v : p) v /= z;
    return p;
}

// Full-support bump blended with a uniform floor. Keeping every category's
// mass strictly positive keeps the optimal softmax logits finite, so
// gradient training converges within the early-stopping window instead of
// chasing saturated tails.
inline std::vector<double> full_support_bump(int k_levels, double center, double sigma,
                                             double floor_eps) {
    std::vector<double> p(static_cast<std::size_t>(k_levels));
    double z = 0.0;
    for (int k = 0; k < k_levels; ++k) {
        const double t = (static_cast<double>(k) - center) / sigma;
        p[static_cast<std::size_t>(k)] = std::exp(-0.5 * t * t);
        z += p[static_cast<std::size_t>(k)];
    }
    const double uniform = 1.0 / static_cast<double>(k_levels);
    for (auto& v : p) v = (1.0 - floor_eps) * (v / z) + floor_eps * uniform;
    return p;
}

inline std::vector<double> skewed_latent(int k_levels, Rng& rng) {
    const double rho = rng.uniform(0.3, 0.9);
    const bool ascending = rng.uniform() < 0.5;
    std::vector<double> p(static_cast<std::size_t>(k_levels));
    double z = 0.0;
    for (int k = 0; k < k_levels; ++k) {
        const int distance = ascending ? (k_levels - 1 - k) : k;
        p[static_cast<std::size_t>(k)] = std::pow(rho, distance);
        z += p[static_cast<std::size_t>(k)];
    }
    for (auto& v : p) v /= z;
    return p;
}

// Polarized latent: equal mass on the low and high bands, split with dyadic
// weights so the band sums are exact in floating point no matter the order
// they are added in. K=3 is the canonical [0.5, 0, 0.5]; for larger scales
// every category keeps strictly positive mass (finite optimal logits) and an
// odd scale's middle category carries a small dyadic mass m, putting the
// index at exactly (1-m)^2 — high, but spread over the top bins.
inline std::vector<double> polarized_latent(int k_levels, Rng& rng) {
    std::vector<double> p(static_cast<std::size_t>(k_levels), 0.0);
    if (k_levels == 3) {
        p = {0.5, 0.0, 0.5};
        return p;
    }
    const bool odd = (k_levels % 2) != 0;
    double mid_mass = 0.0;
    if (odd) {
        static constexpr double kMidChoices[] = {1.0 / 32, 2.0 / 32, 3.0 / 32,
                                                 4.0 / 32, 5.0 / 32, 6.0 / 32};
        mid_mass = kMidChoices[rng.uniform_index(6)];
        p[static_cast<std::size_t>(k_levels / 2)] = mid_mass;
    }
    const double side = (1.0 - mid_mass) / 2.0;  // dyadic, so exact
    auto fill_band = [&](const std::vector<int>& idx) {
        const std::size_t band = idx.size();
        std::vector<double> w(band);
        if (band == 1) {
            w[0] = 1.0;
        } else if (band == 2) {
            static constexpr double kExtremeShare[] = {4.0 / 8, 5.0 / 8, 6.0 / 8, 7.0 / 8};
            w[0] = kExtremeShare[rng.uniform_index(4)];
            w[1] = 1.0 - w[0];
        } else {
            const bool flat_ok = (band & (band - 1)) == 0;
            const std::size_t shape = rng.uniform_index(flat_ok ? 3 : 2);
            if (shape == 2) {
                for (auto& v : w) v = 1.0 / static_cast<double>(band);
            } else {
                double h = 0.5;  // halving decay, doubled last entry
                for (std::size_t j = 0; j + 1 < band; ++j) {
                    w[j] = h;
                    h *= 0.5;
                }
                w[band - 1] = h * 2.0;
                if (shape == 1) std::reverse(w.begin(), w.end());  // inner-heavy variant
            }
        }
        for (std::size_t j = 0; j < band; ++j) {
            p[static_cast<std::size_t>(idx[j])] = side * w[j];
        }
    };
    std::vector<int> low, high;
    for (int k = 0; k < k_levels; ++k) {
        if (2 * k < k_levels - 1) low.push_back(k);
        if (2 * k > k_levels - 1) high.push_back(k);
    }
    std::reverse(high.begin(), high.end());  // extreme bin first
    fill_band(low);
    fill_band(high);
    return p;
}

inline LikertDistribution make_latent(Profile profile, int k_levels, Rng& rng) {
    const double top = static_cast<double>(k_levels - 1);
    std::vector<double> p;
    // Bump width tracks the scale span on narrow scales so side-consensus
    // items never smear enough mass across the midpoint to look polarized.
    const double sigma_scale = std::min(1.0, top / 4.0);
    switch (profile) {
        case Profile::ConsensusLow:
            p = full_support_bump(k_levels, rng.uniform(0.0, 0.25 * top),
                                  sigma_scale * rng.uniform(0.45, 0.85), rng.uniform(0.04, 0.08));
            break;
        case Profile::ConsensusMid:
            // One side stays exactly empty, keeping the latent opposition
            // index at exactly zero.
            p = one_sided_bump(k_levels, rng.uniform() < 0.5, 0.5 * top, rng.uniform(0.35, 0.9));
            break;
        case Profile::ConsensusHigh:
            p = full_support_bump(k_levels, rng.uniform(0.75 * top, top),
                                  sigma_scale * rng.uniform(0.45, 0.85), rng.uniform(0.04, 0.08));
            break;
        case Profile::Skewed:
            p = skewed_latent(k_levels, rng);
            break;
        case Profile::Polarized:
            p = polarized_latent(k_levels, rng);
            break;
    }
    LikertDistribution dist{std::move(p)};
    dist.validate();
    return dist;
}

}  // namespace detail

// Deterministic corpus: each item draws a latent rating distribution from the
// profile mixture, samples annotations from it, and embeds it through a
// corpus-wide affine map plus Gaussian noise. Item streams are seeded
// independently, so generation can be sharded by index range.
inline std::vector<SynthItem> generate_corpus(const SynthConfig& cfg) {
    cfg.validate();
    const auto dim = static_cast<std::size_t>(cfg.feature_dim);
    const auto k = static_cast<std::size_t>(cfg.k_levels);

    // The map amplitude sets the signal scale the noise competes against;
    // +-2 keeps recovery comfortably solvable at the default noise_temp
    // while leaving noise_temp as a continuous difficulty dial. The offset
    // stays small so features are near-centered: a large constant shift
    // would just burn early training epochs on bias cancellation.
    Rng feature_rng(derive_seed(cfg.seed, detail::kSynthFeatureStream));
    std::vector<double> map(dim * k);
    std::vector<double> offset(dim);
    for (auto& v : map) v = feature_rng.uniform(-2.0, 2.0);
    for (auto& v : offset) v = feature_rng.uniform(-0.25, 0.25);

    const std::vector<double> mixture(cfg.mixture.begin(), cfg.mixture.end());
    const std::uint64_t item_base = derive_seed(cfg.seed, detail::kSynthItemStream);

    std::vector<SynthItem> items(static_cast<std::size_t>(cfg.n_items));
    for (int i = 0; i < cfg.n_items; ++i) {
        Rng rng(derive_seed(item_base, static_cast<std::uint64_t>(i)));
        auto& item = items[static_cast<std::size_t>(i)];

        std::ostringstream id;
        id << "synth_" << std::setw(6) << std::setfill('0') << i;
        item.id = id.str();

        item.profile = static_cast<Profile>(rng.categorical(mixture));
        item.latent = detail::make_latent(item.profile, cfg.k_levels, rng);

        const int n = rng.uniform_int(cfg.annotators.lo, cfg.annotators.hi);
        item.ratings = sample_annotations(item.latent, n, rng);

        item.features.resize(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            double f = offset[d];
            for (std::size_t j = 0; j < k; ++j) f += map[d * k + j] * item.latent.p[j];
            item.features[d] = f + cfg.noise_temp * rng.normal();
        }
    }
    return items;
}

inline double latent_variance(const SynthItem& item) { return distribution_variance(item.latent); }

inline double latent_opposition(const SynthItem& item) { return opposition_index(item.latent); }

inline EmbeddingStore corpus_embeddings(const std::vector<SynthItem>& items) {
    if (items.empty()) throw std::invalid_argument("corpus_embeddings: no items");
    EmbeddingStore store;
    store.dim = static_cast<int>(items.front().features.size());
    for (const auto& item : items) {
        store.ids.push_back(item.id);
        store.rows[item.id] = item.features;
    }
    return store;
}

inline std::string corpus_annotations_jsonl(const std::vector<SynthItem>& items) {
    std::string out;
    for (const auto& item : items) {
        for (std::size_t j = 0; j < item.ratings.size(); ++j) {
            nlohmann::ordered_json line;
            line["item_id"] = item.id;
            line["annotator_id"] = "a" + std::to_string(j);
            line["rating"] = item.ratings[j];
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

inline void write_corpus(const std::vector<SynthItem>& items, const std::string& annotations_path,
                         const std::string& embeddings_path) {
    detail::write_file_atomic(annotations_path, corpus_annotations_jsonl(items));
    save_embeddings(corpus_embeddings(items), embeddings_path);
}

inline Dataset make_synth_dataset(const std::vector<SynthItem>& items, const RatingScale& scale) {
    if (items.empty()) throw std::invalid_argument("make_synth_dataset: no items");
    Dataset ds;
    ds.scale = scale;
    ds.feature_dim = static_cast<int>(items.front().features.size());
    ds.items.reserve(items.size());
    for (const auto& item : items) {
        ds.items.push_back(make_dataset_item(ItemAnnotations{item.id, item.ratings}, scale, item.features));
    }
    ds.validate();
    return ds;
}

}  // namespace likert
