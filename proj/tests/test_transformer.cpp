#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfconvtr/errors.hpp"
#include "mfconvtr/rng.hpp"
#include "mfconvtr/transformer.hpp"
#include "oracles.hpp"

using namespace mfconvtr;

namespace {

TensorPtr rand_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return Tensor::from_data(std::move(shape), oracles::random_vector(n, rng),
                             requires_grad);
}

EncoderConfig small_config() {
    EncoderConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    return cfg;
}

}  // namespace

TEST_CASE("single-step attention is the output projection of V") {
    EncoderConfig cfg = small_config();
    ParamRegistry registry;
    auto mha = make_mha("mha", cfg, registry);
    registry.initialize(1);

    Rng rng(2);
    auto x = rand_tensor({1, cfg.d_model}, rng);
    AttentionCapture capture;
    auto y = mha_forward(x, mha, &capture);

    REQUIRE(capture.head_probs.size() == 2);
    for (const auto& probs : capture.head_probs) {
        REQUIRE(probs.size() == 1);
        CHECK(probs[0] == 1.0);
    }
    auto v = ops::dense(x, mha.wv, mha.bv);
    auto expected = ops::dense(v, mha.wo, mha.bo);
    for (std::size_t i = 0; i < y->size(); ++i) CHECK(y->data[i] == expected->data[i]);
}

TEST_CASE("identical time steps give uniform attention rows") {
    EncoderConfig cfg = small_config();
    ParamRegistry registry;
    auto mha = make_mha("mha", cfg, registry);
    registry.initialize(3);

    const int t_len = 5;
    Rng rng(4);
    std::vector<double> row = oracles::random_vector(static_cast<std::size_t>(cfg.d_model), rng);
    std::vector<double> data;
    for (int t = 0; t < t_len; ++t) data.insert(data.end(), row.begin(), row.end());
    auto x = Tensor::from_data({t_len, cfg.d_model}, data);

    AttentionCapture capture;
    mha_forward(x, mha, &capture);
    for (const auto& probs : capture.head_probs)
        for (double p : probs) CHECK(p == doctest::Approx(1.0 / t_len).epsilon(1e-12));
}

TEST_CASE("attention rows are stochastic for random inputs") {
    EncoderConfig cfg;
    cfg.n_layers = 1;
    ParamRegistry registry;
    auto mha = make_mha("mha", cfg, registry);
    registry.initialize(5);

    Rng rng(6);
    auto x = rand_tensor({16, cfg.d_model}, rng);
    AttentionCapture capture;
    mha_forward(x, mha, &capture);
    REQUIRE(capture.head_probs.size() == 8);
    for (const auto& probs : capture.head_probs) {
        for (int r = 0; r < 16; ++r) {
            double s = 0.0;
            for (int c = 0; c < 16; ++c) {
                const double p = probs[static_cast<std::size_t>(r) * 16 + c];
                CHECK(p >= 0.0);
                s += p;
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("attention parameter count is 4(d^2+d) and head-count invariant") {
    EncoderConfig cfg;
    CHECK(mha_param_count(cfg) == 66048);
    for (int heads : {4, 8, 16}) {
        EncoderConfig c = cfg;
        c.n_heads = heads;
        ParamRegistry registry;
        make_mha("mha", c, registry);
        CHECK(registry.total_count() == 66048);
    }
}

TEST_CASE("encoder layer counts 132480 parameters at d=128, d_ff=256") {
    EncoderConfig cfg;
    CHECK(encoder_layer_param_count(cfg) == 132480);
    cfg.n_layers = 1;
    ParamRegistry registry;
    make_encoder(cfg, registry);
    CHECK(registry.total_count() == 132480);
}

TEST_CASE("encoder stack parameters scale linearly in the layer count") {
    for (int layers : {0, 1, 2, 3}) {
        EncoderConfig cfg;
        cfg.n_layers = layers;
        CHECK(encoder_param_count(cfg) == 132480LL * layers);
        ParamRegistry registry;
        make_encoder(cfg, registry);
        CHECK(registry.total_count() == 132480LL * layers);
    }
}

TEST_CASE("encoder layer preserves shape for any T") {
    EncoderConfig cfg = small_config();
    ParamRegistry registry;
    auto encoder = make_encoder(cfg, registry);
    registry.initialize(7);
    Rng rng(8);
    for (int t_len : {1, 3, 17}) {
        auto x = rand_tensor({t_len, cfg.d_model}, rng);
        auto y = encoder_stack(x, encoder);
        CHECK(y->shape == x->shape);
    }
}

TEST_CASE("zero-layer encoder stack is the identity") {
    EncoderConfig cfg = small_config();
    cfg.n_layers = 0;
    ParamRegistry registry;
    auto encoder = make_encoder(cfg, registry);
    Rng rng(9);
    auto x = rand_tensor({6, cfg.d_model}, rng);
    auto y = encoder_stack(x, encoder);
    for (std::size_t i = 0; i < x->size(); ++i) CHECK(y->data[i] == x->data[i]);
}

TEST_CASE("encoder stack is permutation-equivariant without positional encoding") {
    EncoderConfig cfg = small_config();
    cfg.n_layers = 2;
    ParamRegistry registry;
    auto encoder = make_encoder(cfg, registry);
    registry.initialize(10);

    const int t_len = 9;
    Rng rng(11);
    auto x = rand_tensor({t_len, cfg.d_model}, rng);

    std::vector<int> perm(static_cast<std::size_t>(t_len));
    for (int i = 0; i < t_len; ++i) perm[static_cast<std::size_t>(i)] = (i * 4 + 2) % t_len;

    auto permuted = Tensor::zeros({t_len, cfg.d_model});
    for (int i = 0; i < t_len; ++i)
        for (int j = 0; j < cfg.d_model; ++j)
            permuted->data[static_cast<std::size_t>(i) * cfg.d_model + j] =
                x->data[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * cfg.d_model + j];

    auto y = encoder_stack(x, encoder);
    auto y_perm = encoder_stack(permuted, encoder);
    for (int i = 0; i < t_len; ++i)
        for (int j = 0; j < cfg.d_model; ++j)
            CHECK(std::abs(y_perm->data[static_cast<std::size_t>(i) * cfg.d_model + j] -
                           y->data[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) *
                                       cfg.d_model + j]) <= 1e-12);

    // With the sinusoidal encoding switched on the property must break.
    encoder.positional_encoding = true;
    auto z = encoder_stack(x, encoder);
    auto z_perm = encoder_stack(permuted, encoder);
    double max_diff = 0.0;
    for (int i = 0; i < t_len; ++i)
        for (int j = 0; j < cfg.d_model; ++j)
            max_diff = std::max(
                max_diff,
                std::abs(z_perm->data[static_cast<std::size_t>(i) * cfg.d_model + j] -
                         z->data[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) *
                                     cfg.d_model + j]));
    CHECK(max_diff > 1e-6);
}

TEST_CASE("gradient check through one encoder layer") {
    EncoderConfig cfg = small_config();
    ParamRegistry registry;
    auto encoder = make_encoder(cfg, registry);
    registry.initialize(12);

    Rng rng(13);
    auto x = rand_tensor({5, cfg.d_model}, rng, true);
    std::vector<TensorPtr> inputs{x};
    std::vector<std::string> names{"sequence"};
    for (const auto& entry : registry.entries()) {
        inputs.push_back(entry.tensor);
        names.push_back(entry.name);
    }
    auto report = grad_check(
        [&](const std::vector<TensorPtr>& in) {
            auto y = encoder_layer(in[0], encoder.layers.front());
            return ops::sum(ops::mul(y, y));
        },
        inputs, 1e-5, 12, names);
    CHECK(report.max_rel_dev <= 1e-3);
}

TEST_CASE("classifier head pools constants exactly and counts 8386 parameters") {
    HeadConfig cfg;
    CHECK(head_param_count(128, cfg) == 8386);
    ParamRegistry registry;
    auto head = make_head(cfg, 128, registry);
    CHECK(registry.total_count() == 8386);
    registry.initialize(14);

    const int t_len = 7;
    Rng rng(15);
    std::vector<double> features = oracles::random_vector(128, rng);
    std::vector<double> data;
    for (int t = 0; t < t_len; ++t) data.insert(data.end(), features.begin(), features.end());
    auto x = Tensor::from_data({t_len, 128}, data);
    auto logits = classify_head(x, head);
    REQUIRE(logits->shape == std::vector<int>{2});

    auto single = Tensor::from_data({1, 128}, features);
    auto expected = classify_head(single, head);
    for (int i = 0; i < 2; ++i)
        CHECK(logits->data[static_cast<std::size_t>(i)] ==
              doctest::Approx(expected->data[static_cast<std::size_t>(i)]).epsilon(1e-12));

    auto loss = ops::cross_entropy(logits, 1);
    CHECK(std::isfinite(loss->value()));
}

TEST_CASE("config validation rejects malformed encoder and head settings") {
    EncoderConfig bad;
    bad.n_heads = 5;  // 128 % 5 != 0
    CHECK_THROWS_AS(validate(bad), ConfigError);
    HeadConfig head;
    head.fc_widths = {64, 3};
    CHECK_THROWS_AS(validate(head), ConfigError);
}
