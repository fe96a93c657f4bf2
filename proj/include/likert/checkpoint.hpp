#pragma once

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "likert/bytes.hpp"
#include "likert/model.hpp"

namespace likert {

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'L', 'K', 'C', 'K', 'P', 'T', '1', '\0'};

// Parameter container shaped for `cfg` but left zeroed, ready to unflatten
// into.
inline MlpParams shaped_params(const ModelConfig& cfg) {
    const auto dims = cfg.layer_dims();
    MlpParams params;
    params.layers.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        params.layers[l].w.assign(static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]), 0.0);
        params.layers[l].b.assign(static_cast<std::size_t>(dims[l + 1]), 0.0);
    }
    return params;
}

}  // namespace detail

inline nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::ordered_json j;
    j["input_dim"] = cfg.input_dim;
    j["hidden_dims"] = cfg.hidden_dims;
    j["activation"] = activation_name(cfg.activation);
    j["head"] = {{"kind", head_tag_name(cfg.head.tag)}, {"k", cfg.head.k}};
    return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    cfg.activation = parse_activation(j.at("activation").get<std::string>());
    cfg.head.tag = parse_head_tag(j.at("head").at("kind").get<std::string>());
    cfg.head.k = j.at("head").at("k").get<int>();
    cfg.validate();
    return cfg;
}

struct Checkpoint {
    ModelConfig config;
    MlpParams params;
};

inline std::string serialize_checkpoint(const ModelConfig& cfg, const MlpParams& params) {
    cfg.validate();
    if (params.count() != cfg.param_count()) {
        throw std::invalid_argument("serialize_checkpoint: parameter count does not match the config");
    }
    std::string out;
    out.append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    const std::string config_json = model_config_to_json(cfg).dump();
    detail::put_u32(out, static_cast<std::uint32_t>(config_json.size()));
    out += config_json;
    for (double v : params.flatten()) detail::put_f64(out, v);
    return out;
}

inline Checkpoint parse_checkpoint(const std::string& blob) {
    detail::ByteReader r{blob, "checkpoint file"};
    const std::string magic = r.bytes(sizeof(detail::kCheckpointMagic), "magic");
    if (std::memcmp(magic.data(), detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic)) != 0) {
        throw std::runtime_error("checkpoint file magic mismatch");
    }
    const std::uint32_t config_len = r.u32("config length");
    const std::string config_json = r.bytes(config_len, "config");

    Checkpoint ckpt;
    try {
        ckpt.config = model_config_from_json(nlohmann::json::parse(config_json));
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("checkpoint file config is not valid JSON");
    }

    std::vector<double> flat(ckpt.config.param_count());
    for (auto& v : flat) v = r.f64("parameters");
    if (r.at != blob.size()) throw std::runtime_error("checkpoint file has trailing bytes");

    ckpt.params = detail::shaped_params(ckpt.config);
    ckpt.params.unflatten(flat);
    return ckpt;
}

inline void save_checkpoint(const ModelConfig& cfg, const MlpParams& params, const std::string& path) {
    detail::write_file_atomic(path, serialize_checkpoint(cfg, params));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    return parse_checkpoint(detail::read_file(path));
}

}  // namespace likert
