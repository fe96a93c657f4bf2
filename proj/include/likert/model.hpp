#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "likert/rng.hpp"
#include "likert/scale.hpp"
#include "likert/stats.hpp"

namespace likert {

enum class HeadTag { Distribution, ScalarNonNeg, BinaryProb };

// Output head of the predictor. `k` is the rating-scale size; Distribution
// heads emit a k-vector, BinaryProb heads need k to map their probability
// back onto a variance, ScalarNonNeg ignores it.
struct HeadKind {
    HeadTag tag = HeadTag::Distribution;
    int k = 5;

    [[nodiscard]] int output_dim() const { return tag == HeadTag::Distribution ? k : 1; }

    void validate() const {
        if ((tag == HeadTag::Distribution || tag == HeadTag::BinaryProb) && k < 2) {
            throw std::invalid_argument("HeadKind: k must be at least 2");
        }
    }
};

inline const char* head_tag_name(HeadTag tag) {
    switch (tag) {
        case HeadTag::Distribution: return "distribution";
        case HeadTag::ScalarNonNeg: return "scalar_nonneg";
        case HeadTag::BinaryProb: return "binary_prob";
    }
    throw std::invalid_argument("head_tag_name: unknown tag");
}

inline HeadTag parse_head_tag(const std::string& name) {
    if (name == "distribution") return HeadTag::Distribution;
    if (name == "scalar_nonneg") return HeadTag::ScalarNonNeg;
    if (name == "binary_prob") return HeadTag::BinaryProb;
    throw std::invalid_argument("unknown head kind: " + name);
}

enum class Activation { Relu, Tanh };

inline const char* activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "tanh";
}

inline Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + name);
}

struct ModelConfig {
    int input_dim = 0;
    std::vector<int> hidden_dims{256, 64};
    Activation activation = Activation::Relu;
    HeadKind head;

    void validate() const {
        if (input_dim <= 0) throw std::invalid_argument("ModelConfig: input_dim must be positive");
        if (hidden_dims.empty()) throw std::invalid_argument("ModelConfig: hidden_dims must be non-empty");
        for (int d : hidden_dims) {
            if (d <= 0) throw std::invalid_argument("ModelConfig: hidden dims must be positive");
        }
        head.validate();
    }

    // Layer widths from input to head output.
    [[nodiscard]] std::vector<int> layer_dims() const {
        std::vector<int> dims;
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(head.output_dim());
        return dims;
    }

    [[nodiscard]] std::size_t param_count() const {
        validate();
        const auto dims = layer_dims();
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            n += (static_cast<std::size_t>(dims[l]) + 1) * static_cast<std::size_t>(dims[l + 1]);
        }
        return n;
    }
};

// Dense parameters; weights are row-major (out x in). The same struct holds
// gradients, so arithmetic helpers below operate on either.
struct MlpParams {
    struct Layer {
        std::vector<double> w;
        std::vector<double> b;
    };
    std::vector<Layer> layers;

    [[nodiscard]] std::size_t count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    // Parameters flattened in declaration order: per layer, weights then biases.
    [[nodiscard]] std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(count());
        for (const auto& l : layers) {
            out.insert(out.end(), l.w.begin(), l.w.end());
            out.insert(out.end(), l.b.begin(), l.b.end());
        }
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        std::size_t at = 0;
        for (auto& l : layers) {
            for (auto& v : l.w) v = flat.at(at++);
            for (auto& v : l.b) v = flat.at(at++);
        }
        if (at != flat.size()) throw std::invalid_argument("MlpParams: flat size mismatch");
    }
};

inline MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    z.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        z.layers[l].w.assign(p.layers[l].w.size(), 0.0);
        z.layers[l].b.assign(p.layers[l].b.size(), 0.0);
    }
    return z;
}

// Fan-in-scaled uniform weights, zero biases; bitwise reproducible per seed.
inline MlpParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto dims = cfg.layer_dims();
    Rng rng(seed);
    MlpParams params;
    params.layers.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto fan_in = static_cast<std::size_t>(dims[l]);
        const auto fan_out = static_cast<std::size_t>(dims[l + 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        auto& layer = params.layers[l];
        layer.w.resize(fan_out * fan_in);
        for (auto& w : layer.w) w = rng.uniform(-bound, bound);
        layer.b.assign(fan_out, 0.0);
    }
    return params;
}

namespace detail {

inline double apply_activation(Activation a, double z) {
    return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double activation_grad(Activation a, double z, double out) {
    return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
}

inline double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace detail

// Intermediate state from one forward pass, kept for backpropagation.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;  // [0] is the input
    std::vector<std::vector<double>> pre_acts;     // one per layer
    std::vector<double> output;                    // head output
};

inline ForwardTrace forward_trace(const MlpParams& params, const ModelConfig& cfg,
                                  const std::vector<double>& features) {
    cfg.validate();
    if (features.size() != static_cast<std::size_t>(cfg.input_dim)) {
        throw std::invalid_argument("forward: feature length " + std::to_string(features.size()) +
                                    " does not match input_dim " + std::to_string(cfg.input_dim));
    }
    const auto dims = cfg.layer_dims();
    if (params.layers.size() != dims.size() - 1) {
        throw std::invalid_argument("forward: parameter shape does not match config");
    }
    ForwardTrace trace;
    trace.activations.reserve(dims.size());
    trace.pre_acts.reserve(dims.size() - 1);
    trace.activations.push_back(features);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto& layer = params.layers[l];
        const auto in_dim = static_cast<std::size_t>(dims[l]);
        const auto out_dim = static_cast<std::size_t>(dims[l + 1]);
        if (layer.w.size() != in_dim * out_dim || layer.b.size() != out_dim) {
            throw std::invalid_argument("forward: parameter shape does not match config");
        }
        const auto& in = trace.activations.back();
        std::vector<double> z(out_dim);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double* row = layer.w.data() + o * in_dim;
            double acc = layer.b[o];
            for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * in[i];
            z[o] = acc;
        }
        const bool is_head = (l + 2 == dims.size());
        std::vector<double> a;
        if (!is_head) {
            a.resize(out_dim);
            for (std::size_t o = 0; o < out_dim; ++o) a[o] = detail::apply_activation(cfg.activation, z[o]);
        }
        trace.pre_acts.push_back(std::move(z));
        if (!is_head) trace.activations.push_back(std::move(a));
    }
    const auto& z_head = trace.pre_acts.back();
    switch (cfg.head.tag) {
        case HeadTag::Distribution: trace.output = detail::softmax(z_head); break;
        case HeadTag::ScalarNonNeg: trace.output = {detail::softplus(z_head[0])}; break;
        case HeadTag::BinaryProb: trace.output = {detail::sigmoid(z_head[0])}; break;
    }
    return trace;
}

inline std::vector<double> forward(const MlpParams& params, const ModelConfig& cfg,
                                   const std::vector<double>& features) {
    return forward_trace(params, cfg, features).output;
}

// Backpropagates one item's upstream gradient into parameter gradients,
// accumulating into `grads` (sum reduction over a batch).
//
// The upstream convention follows the losses: Distribution and BinaryProb
// heads receive gradients already taken w.r.t. the head pre-activation;
// ScalarNonNeg receives the derivative w.r.t. the head output and the
// softplus factor is composed here.
inline void backward_accumulate(const MlpParams& params, const ModelConfig& cfg, const ForwardTrace& trace,
                                const std::vector<double>& upstream, MlpParams& grads) {
    if (upstream.size() != trace.output.size()) {
        throw std::invalid_argument("backward: upstream gradient shape mismatch");
    }
    if (grads.layers.size() != params.layers.size()) {
        throw std::invalid_argument("backward: gradient accumulator shape mismatch");
    }
    const auto dims = cfg.layer_dims();
    std::vector<double> delta;
    if (cfg.head.tag == HeadTag::ScalarNonNeg) {
        // d softplus(z) / dz expressed through the output y: 1 - exp(-y).
        delta = {upstream[0] * (1.0 - std::exp(-trace.output[0]))};
    } else {
        delta = upstream;
    }
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const auto in_dim = static_cast<std::size_t>(dims[l]);
        const auto out_dim = static_cast<std::size_t>(dims[l + 1]);
        const auto& in = trace.activations[l];
        auto& g = grads.layers[l];
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            double* grow = g.w.data() + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) grow[i] += d * in[i];
            g.b[o] += d;
        }
        if (l == 0) break;
        const auto& layer = params.layers[l];
        std::vector<double> prev(in_dim, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            const double* row = layer.w.data() + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) prev[i] += row[i] * d;
        }
        const auto& z_prev = trace.pre_acts[l - 1];
        const auto& a_prev = trace.activations[l];
        for (std::size_t i = 0; i < in_dim; ++i) {
            prev[i] *= detail::activation_grad(cfg.activation, z_prev[i], a_prev[i]);
        }
        delta = std::move(prev);
    }
}

inline MlpParams backward(const MlpParams& params, const ModelConfig& cfg, const ForwardTrace& trace,
                          const std::vector<double>& upstream) {
    MlpParams grads = zeros_like(params);
    backward_accumulate(params, cfg, trace, upstream, grads);
    return grads;
}

// Collapses any head's output to a variance estimate on the 0..k-1 scale.
inline double predict_variance(const MlpParams& params, const ModelConfig& cfg,
                               const std::vector<double>& features) {
    const auto out = forward(params, cfg, features);
    switch (cfg.head.tag) {
        case HeadTag::Distribution: return distribution_variance(LikertDistribution{out});
        case HeadTag::ScalarNonNeg: return out[0];
        case HeadTag::BinaryProb: {
            // Mass p at the top rating, 1-p at the bottom.
            const double p = out[0];
            const double range = static_cast<double>(cfg.head.k - 1);
            return p * (1.0 - p) * range * range;
        }
    }
    throw std::logic_error("predict_variance: unknown head");
}

}  // namespace likert
