#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "likert/scale.hpp"
#include "likert/stats.hpp"

namespace likert {

inline constexpr double kProbClampLo = 1e-8;
inline constexpr double kProbClampHi = 1.0 - 1e-8;
inline constexpr double kKlSmoothingEps = 1e-8;

enum class LossTag { EMD, EMD_MSE, CUM_CE, KL_SOFT, BINARY_CE, VAR_REG };

struct LossKind {
    LossTag tag = LossTag::EMD;
    double lambda_mean = 1.0;  // weight of the mean-gap term, EMD_MSE only
    int emd_power = 2;         // exponent on CDF differences, EMD variants only

    void validate() const {
        if (!(lambda_mean >= 0.0) || !std::isfinite(lambda_mean)) {
            throw std::invalid_argument("LossKind: lambda_mean must be finite and >= 0");
        }
        if (emd_power != 1 && emd_power != 2) {
            throw std::invalid_argument("LossKind: emd_power must be 1 or 2");
        }
    }
};

inline const char* loss_tag_name(LossTag tag) {
    switch (tag) {
        case LossTag::EMD: return "emd";
        case LossTag::EMD_MSE: return "emd_mse";
        case LossTag::CUM_CE: return "cum_ce";
        case LossTag::KL_SOFT: return "kl_soft";
        case LossTag::BINARY_CE: return "binary_ce";
        case LossTag::VAR_REG: return "var_reg";
    }
    throw std::invalid_argument("loss_tag_name: unknown tag");
}

inline LossTag parse_loss_tag(const std::string& name) {
    if (name == "emd") return LossTag::EMD;
    if (name == "emd_mse") return LossTag::EMD_MSE;
    if (name == "cum_ce") return LossTag::CUM_CE;
    if (name == "kl_soft") return LossTag::KL_SOFT;
    if (name == "binary_ce") return LossTag::BINARY_CE;
    if (name == "var_reg") return LossTag::VAR_REG;
    throw std::invalid_argument("unknown loss kind: " + name);
}

// Loss value together with its analytic gradient. For distribution losses
// the gradient is taken w.r.t. the pre-normalization logits (the softmax
// map is composed analytically); binary_ce likewise differentiates through
// the sigmoid. var_reg reports the derivative w.r.t. the head output, and
// the model composes its own activation when backpropagating.
struct LossEval {
    double value = 0.0;
    std::vector<double> grad;
};

namespace detail {

inline void check_same_k(const LikertDistribution& pred, const LikertDistribution& target) {
    if (pred.size() != target.size()) {
        throw std::invalid_argument("loss: prediction and target K mismatch");
    }
    pred.validate();
    target.validate();
}

// Chain rule through softmax: given dL/dp, produce dL/dz where p = softmax(z).
inline std::vector<double> through_softmax(const std::vector<double>& p, const std::vector<double>& grad_p) {
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += grad_p[i] * p[i];
    std::vector<double> grad_z(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) grad_z[i] = p[i] * (grad_p[i] - dot);
    return grad_z;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClampLo, kProbClampHi); }

}  // namespace detail

// Average |CDF gap|^power across the K options. Small rating-distance
// mistakes cost less than large ones, unlike any per-category loss.
inline LossEval emd_loss(const LikertDistribution& pred, const LikertDistribution& target, int power = 2) {
    detail::check_same_k(pred, target);
    if (power != 1 && power != 2) throw std::invalid_argument("emd_loss: power must be 1 or 2");
    const std::size_t k = pred.size();
    std::vector<double> cdf_gap(k);
    double cum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        cum += pred.p[i] - target.p[i];
        cdf_gap[i] = cum;
    }
    LossEval out;
    const double inv_k = 1.0 / static_cast<double>(k);
    for (double g : cdf_gap) {
        out.value += inv_k * (power == 2 ? g * g : std::abs(g));
    }
    // dValue/dp_m accumulates the per-threshold derivative over thresholds >= m.
    std::vector<double> grad_p(k, 0.0);
    double suffix = 0.0;
    for (std::size_t i = k; i-- > 0;) {
        const double g = cdf_gap[i];
        suffix += inv_k * (power == 2 ? 2.0 * g : (g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0)));
        grad_p[i] = suffix;
    }
    out.grad = detail::through_softmax(pred.p, grad_p);
    return out;
}

// EMD plus a squared penalty on the gap between predicted and target means.
inline LossEval emd_mse_loss(const LikertDistribution& pred, const LikertDistribution& target,
                             double lambda_mean = 1.0, int power = 2) {
    if (!(lambda_mean >= 0.0) || !std::isfinite(lambda_mean)) {
        throw std::invalid_argument("emd_mse_loss: lambda_mean must be finite and >= 0");
    }
    LossEval out = emd_loss(pred, target, power);
    const double mean_gap = distribution_mean(pred) - distribution_mean(target);
    out.value += lambda_mean * mean_gap * mean_gap;
    // d(mean gap term)/dp_m = 2 lambda (mu_p - mu_t) m, then through softmax.
    std::vector<double> grad_p(pred.size());
    for (std::size_t m = 0; m < pred.size(); ++m) {
        grad_p[m] = 2.0 * lambda_mean * mean_gap * static_cast<double>(m);
    }
    const auto extra = detail::through_softmax(pred.p, grad_p);
    for (std::size_t m = 0; m < pred.size(); ++m) out.grad[m] += extra[m];
    return out;
}

// Recasts the K-way prediction as K-1 binary "rating exceeds k" decisions and
// sums binary cross-entropy over the thresholds.
inline LossEval cumulative_ce_loss(const LikertDistribution& pred, const LikertDistribution& target) {
    detail::check_same_k(pred, target);
    const std::size_t k = pred.size();
    std::vector<double> dloss_dq(k - 1, 0.0);
    LossEval out;
    double q = 0.0;  // exceedance mass of the prediction, built from the top
    double t = 0.0;
    std::vector<double> q_at(k - 1), t_at(k - 1);
    for (std::size_t i = k; i-- > 1;) {
        q += pred.p[i];
        t += target.p[i];
        q_at[i - 1] = q;
        t_at[i - 1] = t;
    }
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const double qc = detail::clamp_prob(q_at[i]);
        const double tc = t_at[i];
        out.value += -(tc * std::log(qc) + (1.0 - tc) * std::log(1.0 - qc));
        dloss_dq[i] = (qc - tc) / (qc * (1.0 - qc));
    }
    // dq_i/dp_m = 1 for m > i, so dL/dp_m sums the threshold derivatives below m.
    std::vector<double> grad_p(k, 0.0);
    double prefix = 0.0;
    for (std::size_t m = 1; m < k; ++m) {
        prefix += dloss_dq[m - 1];
        grad_p[m] = prefix;
    }
    out.grad = detail::through_softmax(pred.p, grad_p);
    return out;
}

// KL divergence from target to prediction with both sides additively
// smoothed and renormalized, so empirical zeros stay finite.
inline LossEval kl_soft_loss(const LikertDistribution& pred, const LikertDistribution& target) {
    detail::check_same_k(pred, target);
    const std::size_t k = pred.size();
    const double z = 1.0 + static_cast<double>(k) * kKlSmoothingEps;
    LossEval out;
    std::vector<double> grad_p(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double ts = (target.p[i] + kKlSmoothingEps) / z;
        const double ps = (pred.p[i] + kKlSmoothingEps) / z;
        out.value += ts * std::log(ts / ps);
        grad_p[i] = -ts / (pred.p[i] + kKlSmoothingEps);
    }
    out.value = std::max(out.value, 0.0);
    out.grad = detail::through_softmax(pred.p, grad_p);
    return out;
}

// Probability that the latent rating falls in the upper half of the scale.
inline double aggregate_binary(const LikertDistribution& target) {
    target.validate();
    const double midpoint = static_cast<double>(target.size() - 1) / 2.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (static_cast<double>(i) > midpoint) mass += target.p[i];
    }
    return mass;
}

// Binary cross-entropy over sigmoid outputs; gradient in logit space.
inline LossEval binary_ce_loss(double pred_prob, double target_prob) {
    if (!(target_prob >= 0.0 && target_prob <= 1.0)) {
        throw std::invalid_argument("binary_ce_loss: target must lie in [0,1]");
    }
    const double p = detail::clamp_prob(pred_prob);
    LossEval out;
    out.value = -(target_prob * std::log(p) + (1.0 - target_prob) * std::log(1.0 - p));
    out.grad = {pred_prob - target_prob};
    return out;
}

// Squared error on the variance scalar; gradient w.r.t. the head output.
inline LossEval var_reg_loss(double pred_var, double target_var) {
    if (!std::isfinite(pred_var) || !std::isfinite(target_var) || pred_var < 0.0 || target_var < 0.0) {
        throw std::invalid_argument("var_reg_loss: variances must be finite and >= 0");
    }
    LossEval out;
    const double gap = pred_var - target_var;
    out.value = gap * gap;
    out.grad = {2.0 * gap};
    return out;
}

[[nodiscard]] inline bool is_distribution_loss(LossTag tag) {
    return tag == LossTag::EMD || tag == LossTag::EMD_MSE || tag == LossTag::CUM_CE || tag == LossTag::KL_SOFT;
}

// Dispatch on the configured loss kind. Scalar losses take 1-element vectors.
inline LossEval compute_loss(const LossKind& kind, const std::vector<double>& pred,
                             const std::vector<double>& target) {
    kind.validate();
    if (is_distribution_loss(kind.tag)) {
        LikertDistribution p{pred};
        LikertDistribution t{target};
        switch (kind.tag) {
            case LossTag::EMD: return emd_loss(p, t, kind.emd_power);
            case LossTag::EMD_MSE: return emd_mse_loss(p, t, kind.lambda_mean, kind.emd_power);
            case LossTag::CUM_CE: return cumulative_ce_loss(p, t);
            default: return kl_soft_loss(p, t);
        }
    }
    if (pred.size() != 1 || target.size() != 1) {
        throw std::invalid_argument("compute_loss: scalar loss expects 1-element vectors");
    }
    if (kind.tag == LossTag::BINARY_CE) return binary_ce_loss(pred[0], target[0]);
    return var_reg_loss(pred[0], target[0]);
}

}  // namespace likert
