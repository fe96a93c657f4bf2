#include <catch_amalgamated.hpp>

#include <filesystem>
#include <vector>

#include "likert/checkpoint.hpp"
#include "likert/model.hpp"
#include "likert/rng.hpp"

using Catch::Matchers::ContainsSubstring;

namespace {

likert::ModelConfig small_config() {
    likert::ModelConfig cfg;
    cfg.input_dim = 7;
    cfg.hidden_dims = {9, 4};
    cfg.activation = likert::Activation::Tanh;
    cfg.head = {likert::HeadTag::Distribution, 5};
    return cfg;
}

std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "likert_checkpoint_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("checkpoints restore the config and the exact parameters") {
    const auto cfg = small_config();
    const auto params = likert::init_params(cfg, 42);
    const auto path = temp_path("roundtrip.bin");
    likert::save_checkpoint(cfg, params, path.string());

    const auto loaded = likert::load_checkpoint(path.string());
    CHECK(loaded.config.input_dim == cfg.input_dim);
    CHECK(loaded.config.hidden_dims == cfg.hidden_dims);
    CHECK(loaded.config.activation == cfg.activation);
    CHECK(loaded.config.head.tag == cfg.head.tag);
    CHECK(loaded.config.head.k == cfg.head.k);
    CHECK(loaded.params.flatten() == params.flatten());

    likert::Rng rng(3);
    std::vector<double> x(7);
    for (auto& v : x) v = rng.normal();
    CHECK(likert::forward(loaded.params, loaded.config, x) == likert::forward(params, cfg, x));
}

TEST_CASE("checkpoint serialization rejects mismatched parameters") {
    const auto cfg = small_config();
    auto params = likert::init_params(cfg, 1);
    params.layers.back().b.pop_back();
    CHECK_THROWS_WITH(likert::serialize_checkpoint(cfg, params), ContainsSubstring("parameter count"));
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto cfg = small_config();
    const auto blob = likert::serialize_checkpoint(cfg, likert::init_params(cfg, 7));

    SECTION("bad magic") {
        auto bad = blob;
        bad[0] ^= 0x1;
        CHECK_THROWS_WITH(likert::parse_checkpoint(bad), ContainsSubstring("magic"));
    }
    SECTION("truncated parameters") {
        auto bad = blob.substr(0, blob.size() - 3);
        CHECK_THROWS_WITH(likert::parse_checkpoint(bad), ContainsSubstring("truncated"));
    }
    SECTION("trailing bytes") {
        auto bad = blob + "x";
        CHECK_THROWS_WITH(likert::parse_checkpoint(bad), ContainsSubstring("trailing"));
    }
    SECTION("mangled config") {
        auto bad = blob;
        bad[12] = '}';  // inside the JSON blob, just after the magic and length
        CHECK_THROWS_WITH(likert::parse_checkpoint(bad), ContainsSubstring("JSON"));
    }
}

TEST_CASE("checkpoint config json round trips") {
    const auto cfg = small_config();
    const auto j = likert::model_config_to_json(cfg);
    CHECK(j.at("activation") == "tanh");
    CHECK(j.at("head").at("kind") == "distribution");
    const auto back = likert::model_config_from_json(j);
    CHECK(back.hidden_dims == cfg.hidden_dims);
    CHECK(back.head.k == 5);
}
