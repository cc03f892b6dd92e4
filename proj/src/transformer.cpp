#include "mfconvtr/transformer.hpp"

#include <cmath>

#include "mfconvtr/errors.hpp"

namespace mfconvtr {

void validate(const EncoderConfig& cfg) {
    if (cfg.n_layers < 0) throw ConfigError("encoder layer count must be non-negative");
    if (cfg.n_heads <= 0) throw ConfigError("attention head count must be positive");
    if (cfg.d_model <= 0 || cfg.d_ff <= 0)
        throw ConfigError("encoder dimensions must be positive");
    if (cfg.d_model % cfg.n_heads != 0)
        throw ConfigError("d_model must be divisible by the head count");
}

void validate(const HeadConfig& cfg) {
    if (cfg.fc_widths.empty()) throw ConfigError("classifier head needs at least one layer");
    for (int w : cfg.fc_widths)
        if (w <= 0) throw ConfigError("classifier widths must be positive");
    if (cfg.fc_widths.back() != 2)
        throw ConfigError("classifier head must end in 2 classes");
}

namespace {

HeadParams::Layer make_dense(const std::string& name, int d_in, int d_out,
                             ParamRegistry& registry) {
    return {registry.create(name + ".weight", {d_in, d_out}, InitKind::uniform_fan_in, d_in),
            registry.create(name + ".bias", {d_out}, InitKind::zeros)};
}

}  // namespace

MhaParams make_mha(const std::string& name, const EncoderConfig& cfg,
                   ParamRegistry& registry) {
    const int d = cfg.d_model;
    MhaParams p;
    p.n_heads = cfg.n_heads;
    auto proj = [&](const std::string& which, TensorPtr& w, TensorPtr& b) {
        w = registry.create(name + "." + which + ".weight", {d, d},
                            InitKind::uniform_fan_in, d);
        b = registry.create(name + "." + which + ".bias", {d}, InitKind::zeros);
    };
    proj("query", p.wq, p.bq);
    proj("key", p.wk, p.bk);
    proj("value", p.wv, p.bv);
    proj("output", p.wo, p.bo);
    return p;
}

EncoderParams make_encoder(const EncoderConfig& cfg, ParamRegistry& registry,
                           const std::string& prefix) {
    validate(cfg);
    EncoderParams params;
    params.positional_encoding = cfg.positional_encoding;
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string name = prefix + ".layer" + std::to_string(l + 1);
        EncoderLayerParams layer;
        layer.mha = make_mha(name + ".mha", cfg, registry);
        layer.ln1_gain = registry.create(name + ".norm1.gain", {cfg.d_model}, InitKind::ones);
        layer.ln1_shift = registry.create(name + ".norm1.shift", {cfg.d_model}, InitKind::zeros);
        auto ff1 = make_dense(name + ".ffn.fc1", cfg.d_model, cfg.d_ff, registry);
        auto ff2 = make_dense(name + ".ffn.fc2", cfg.d_ff, cfg.d_model, registry);
        layer.ff1_weight = ff1.weight;
        layer.ff1_bias = ff1.bias;
        layer.ff2_weight = ff2.weight;
        layer.ff2_bias = ff2.bias;
        layer.ln2_gain = registry.create(name + ".norm2.gain", {cfg.d_model}, InitKind::ones);
        layer.ln2_shift = registry.create(name + ".norm2.shift", {cfg.d_model}, InitKind::zeros);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

HeadParams make_head(const HeadConfig& cfg, int d_in, ParamRegistry& registry,
                     const std::string& prefix) {
    validate(cfg);
    HeadParams params;
    int prev = d_in;
    for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
        const int width = cfg.fc_widths[i];
        params.layers.push_back(
            make_dense(prefix + ".fc" + std::to_string(i + 1), prev, width, registry));
        prev = width;
    }
    return params;
}

TensorPtr mha_forward(const TensorPtr& x, const MhaParams& params,
                      AttentionCapture* capture) {
    if (x->ndim() != 2) throw ConfigError("attention input must be [T, d]");
    const int d = x->dim(1);
    if (params.wq->dim(0) != d)
        throw ConfigError("attention input width does not match the projections");
    const int heads = params.n_heads;
    const int head_dim = d / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    TensorPtr q = ops::dense(x, params.wq, params.bq);
    TensorPtr k = ops::dense(x, params.wk, params.bk);
    TensorPtr v = ops::dense(x, params.wv, params.bv);

    if (capture) {
        capture->head_probs.clear();
        capture->t_len = x->dim(0);
    }

    std::vector<TensorPtr> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        // The 1/sqrt(head_dim) factor goes on Q, the smaller operand.
        TensorPtr qh = ops::scale(ops::slice(q, 1, h * head_dim, head_dim), att_scale);
        TensorPtr kh = ops::slice(k, 1, h * head_dim, head_dim);
        TensorPtr vh = ops::slice(v, 1, h * head_dim, head_dim);
        TensorPtr scores = ops::matmul_nt(qh, kh);
        TensorPtr probs = ops::softmax(scores, 1);
        if (capture) capture->head_probs.push_back(probs->data);
        head_outputs.push_back(ops::matmul(probs, vh));
    }
    TensorPtr merged = heads == 1 ? head_outputs.front() : ops::concat(head_outputs, 1);
    return ops::dense(merged, params.wo, params.bo);
}

// Pre-norm residual wiring: normalization feeds each sublayer and the
// residual stream stays unnormalized, which keeps gradients to the backbone
// well scaled from the first step.
TensorPtr encoder_layer(const TensorPtr& x, const EncoderLayerParams& params) {
    TensorPtr attended = ops::add(
        x, mha_forward(ops::layer_norm(x, params.ln1_gain, params.ln1_shift), params.mha));
    TensorPtr normed = ops::layer_norm(attended, params.ln2_gain, params.ln2_shift);
    TensorPtr hidden = ops::relu(ops::dense(normed, params.ff1_weight, params.ff1_bias));
    TensorPtr projected = ops::dense(hidden, params.ff2_weight, params.ff2_bias);
    return ops::add(attended, projected);
}

namespace {

TensorPtr sinusoidal_encoding(int t_len, int d) {
    auto pe = Tensor::zeros({t_len, d});
    for (int t = 0; t < t_len; ++t) {
        for (int i = 0; i < d; i += 2) {
            const double angle =
                static_cast<double>(t) /
                std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            pe->data[static_cast<std::size_t>(t) * d + i] = std::sin(angle);
            if (i + 1 < d)
                pe->data[static_cast<std::size_t>(t) * d + i + 1] = std::cos(angle);
        }
    }
    return pe;
}

}  // namespace

TensorPtr encoder_stack(const TensorPtr& x, const EncoderParams& params) {
    TensorPtr y = x;
    if (params.positional_encoding && !params.layers.empty())
        y = ops::add(y, sinusoidal_encoding(x->dim(0), x->dim(1)));
    for (const auto& layer : params.layers) y = encoder_layer(y, layer);
    return y;
}

TensorPtr classify_head(const TensorPtr& features, const HeadParams& params) {
    if (features->ndim() != 2) throw ConfigError("classifier input must be [T, d]");
    TensorPtr pooled = ops::mean_axis(features, 0);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        pooled = ops::dense(pooled, params.layers[i].weight, params.layers[i].bias);
        if (i + 1 < params.layers.size()) pooled = ops::relu(pooled);
    }
    return pooled;
}

long long mha_param_count(const EncoderConfig& cfg) {
    const long long d = cfg.d_model;
    return 4 * (d * d + d);
}

long long encoder_layer_param_count(const EncoderConfig& cfg) {
    const long long d = cfg.d_model, ff = cfg.d_ff;
    return mha_param_count(cfg) + 2 * (2 * d) + (d * ff + ff) + (ff * d + d);
}

long long encoder_param_count(const EncoderConfig& cfg) {
    return cfg.n_layers * encoder_layer_param_count(cfg);
}

long long head_param_count(int d_in, const HeadConfig& cfg) {
    long long total = 0;
    long long prev = d_in;
    for (int w : cfg.fc_widths) {
        total += prev * w + w;
        prev = w;
    }
    return total;
}

}  // namespace mfconvtr
