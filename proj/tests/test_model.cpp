#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mfconvtr/errors.hpp"
#include "mfconvtr/model.hpp"
#include "mfconvtr/rng.hpp"
#include "mfconvtr/transformer.hpp"
#include "oracles.hpp"

using namespace mfconvtr;

namespace {

ModelConfig proposed_config() { return ModelConfig{}; }

ModelConfig convnet_config() {
    ModelConfig cfg;
    cfg.backbone.mfconv.kernel_sizes = {15};
    return cfg;
}

std::vector<double> rand_window(std::size_t n, Rng& rng) {
    return oracles::random_vector(n, rng);
}

}  // namespace

TEST_CASE("variants assemble: encoder-free backbone and single-split + encoder") {
    ModelConfig plain = proposed_config();
    plain.encoder.reset();
    Model mfconvnet = build_model(plain);
    Rng rng(1);
    auto logits = mfconvnet.forward(rand_window(200, rng));
    REQUIRE(logits->shape == std::vector<int>{2});

    Model convnet_tx = build_model(convnet_config());
    auto logits2 = convnet_tx.forward(rand_window(200, rng));
    REQUIRE(logits2->shape == std::vector<int>{2});
}

TEST_CASE("same seed and config give bit-identical parameters") {
    Model a = build_model(proposed_config());
    Model b = build_model(proposed_config());
    const auto& ea = a.registry().entries();
    const auto& eb = b.registry().entries();
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea[i].name == eb[i].name);
        REQUIRE(ea[i].tensor->size() == eb[i].tensor->size());
        for (std::size_t j = 0; j < ea[i].tensor->size(); ++j)
            CHECK(ea[i].tensor->data[j] == eb[i].tensor->data[j]);
    }

    ModelConfig other = proposed_config();
    other.seed = 43;
    Model c = build_model(other);
    bool any_diff = false;
    for (std::size_t j = 0; j < ea.front().tensor->size(); ++j)
        any_diff = any_diff ||
                   ea.front().tensor->data[j] != c.registry().entries().front().tensor->data[j];
    CHECK(any_diff);
}

TEST_CASE("encoder contribution is exactly 264960 for any backbone") {
    for (ModelConfig cfg : {proposed_config(), convnet_config()}) {
        ModelConfig without = cfg;
        without.encoder.reset();
        CHECK(build_model(cfg).total_param_count() -
                  build_model(without).total_param_count() ==
              264960);
    }
}

TEST_CASE("each extra encoder layer adds exactly 132480 parameters") {
    ModelConfig two = proposed_config();
    ModelConfig three = proposed_config();
    three.encoder->n_layers = 3;
    CHECK(build_model(three).total_param_count() - build_model(two).total_param_count() ==
          132480);
}

TEST_CASE("attention head count does not change the total") {
    std::vector<long long> totals;
    for (int heads : {4, 8, 16}) {
        ModelConfig cfg = proposed_config();
        cfg.encoder->n_heads = heads;
        totals.push_back(build_model(cfg).total_param_count());
    }
    CHECK(totals[0] == totals[1]);
    CHECK(totals[1] == totals[2]);
}

TEST_CASE("forward gives 2 logits for any window length at least 15") {
    Model model = build_model(proposed_config());
    Rng rng(2);
    for (int t_len : {15, 64, 200}) {
        auto signal = Tensor::from_data({1, t_len},
                                        rand_window(static_cast<std::size_t>(t_len), rng));
        auto logits = model.forward(signal);
        CHECK(logits->shape == std::vector<int>{2});
    }
}

TEST_CASE("model config text round-trips") {
    ModelConfig cfg = proposed_config();
    cfg.seed = 1234;
    cfg.encoder->n_heads = 16;
    cfg.head.fc_widths = {32, 2};
    ModelConfig parsed = parse_model_config(serialize_model_config(cfg));
    CHECK(parsed.seed == cfg.seed);
    CHECK(parsed.backbone.block_channels == cfg.backbone.block_channels);
    CHECK(parsed.backbone.mfconv.kernel_sizes == cfg.backbone.mfconv.kernel_sizes);
    REQUIRE(parsed.encoder.has_value());
    CHECK(parsed.encoder->n_heads == 16);
    CHECK(parsed.head.fc_widths == cfg.head.fc_widths);

    ModelConfig no_encoder = cfg;
    no_encoder.encoder.reset();
    CHECK_FALSE(parse_model_config(serialize_model_config(no_encoder)).encoder.has_value());
}

TEST_CASE("config parser rejects unknown keys and invariant violations") {
    CHECK_THROWS_AS(parse_model_config("[backbone]\nwibble = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_model_config("[wibble]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_model_config("[encoder]\nd_model = 64\n"), ConfigError);

    ModelConfig bad = proposed_config();
    bad.encoder->d_model = 64;  // backbone ends at 128
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("rebuilding from the echoed config reproduces parameter shapes") {
    ModelConfig cfg = proposed_config();
    Model original = build_model(cfg);
    Model rebuilt = build_model(parse_model_config(serialize_model_config(cfg)));
    const auto& ea = original.registry().entries();
    const auto& eb = rebuilt.registry().entries();
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea[i].name == eb[i].name);
        CHECK(ea[i].tensor->shape == eb[i].tensor->shape);
    }
}

TEST_CASE("checkpoint round trip preserves the forward pass bit for bit") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mfconvtr_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    ModelConfig cfg = proposed_config();
    cfg.encoder->n_layers = 1;  // smaller file, same structure
    Model model = build_model(cfg);
    Rng rng(3);
    const auto window = rand_window(200, rng);
    const auto before = model.forward(window);

    save_checkpoint(model, path);
    Model loaded = load_checkpoint(path);
    const auto after = loaded.forward(window);
    REQUIRE(before->size() == after->size());
    for (std::size_t i = 0; i < before->size(); ++i)
        CHECK(before->data[i] == after->data[i]);

    // Saving the loaded model reproduces the file byte for byte.
    const std::string path2 = (dir / "model2.ckpt").string();
    save_checkpoint(loaded, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(bytes1 == bytes2);

    fs::remove_all(dir);
}

TEST_CASE("checkpoint loader distinguishes version, shape and truncation faults") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "mfconvtr_ckpt_fault_test";
    fs::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    ModelConfig cfg = proposed_config();
    cfg.encoder.reset();  // small
    Model model = build_model(cfg);
    save_checkpoint(model, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    auto write_bytes = [&](const std::string& p, const std::string& content) {
        std::ofstream out(p, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    };

    const std::string truncated = bytes.substr(0, bytes.size() - 16);
    write_bytes((dir / "trunc.ckpt").string(), truncated);
    CHECK_THROWS_AS(load_checkpoint((dir / "trunc.ckpt").string()),
                    CheckpointTruncatedError);

    write_bytes((dir / "long.ckpt").string(), bytes + "xxxxxxxx");
    CHECK_THROWS_AS(load_checkpoint((dir / "long.ckpt").string()), DataError);

    std::string wrong_version = bytes;
    wrong_version[wrong_version.find('1')] = '9';
    write_bytes((dir / "version.ckpt").string(), wrong_version);
    CHECK_THROWS_AS(load_checkpoint((dir / "version.ckpt").string()),
                    CheckpointVersionError);

    std::string wrong_name = bytes;
    const std::size_t at = wrong_name.find("backbone.block1.entry.weight");
    wrong_name.replace(at, 8, "spine___");
    write_bytes((dir / "name.ckpt").string(), wrong_name);
    CHECK_THROWS_AS(load_checkpoint((dir / "name.ckpt").string()), CheckpointShapeError);

    fs::remove_all(dir);
}

TEST_CASE("clone copies values and detaches storage") {
    Model model = build_model(convnet_config());
    Model copy = model.clone();
    auto& original_first = model.registry().entries().front().tensor;
    auto& copied_first = copy.registry().entries().front().tensor;
    REQUIRE(original_first->size() == copied_first->size());
    for (std::size_t i = 0; i < original_first->size(); ++i)
        CHECK(original_first->data[i] == copied_first->data[i]);
    copied_first->data[0] += 1.0;
    CHECK(original_first->data[0] != copied_first->data[0]);
}
