#pragma once

#include <string>
#include <vector>

#include "mfconvtr/params.hpp"
#include "mfconvtr/tensor.hpp"

namespace mfconvtr {

struct EncoderConfig {
    int n_layers = 2;
    int n_heads = 8;
    int d_model = 128;
    int d_ff = 256;
    bool positional_encoding = false;  // parameterless sinusoidal, off by default
};

struct HeadConfig {
    std::vector<int> fc_widths{64, 2};  // last width is the class count
};

void validate(const EncoderConfig& cfg);
void validate(const HeadConfig& cfg);

struct MhaParams {
    TensorPtr wq, bq, wk, bk, wv, bv, wo, bo;
    int n_heads = 0;
};

struct EncoderLayerParams {
    MhaParams mha;
    TensorPtr ln1_gain, ln1_shift, ln2_gain, ln2_shift;
    TensorPtr ff1_weight, ff1_bias, ff2_weight, ff2_bias;
};

struct EncoderParams {
    std::vector<EncoderLayerParams> layers;
    bool positional_encoding = false;
};

struct HeadParams {
    struct Layer {
        TensorPtr weight, bias;
    };
    std::vector<Layer> layers;
};

MhaParams make_mha(const std::string& name, const EncoderConfig& cfg,
                   ParamRegistry& registry);
EncoderParams make_encoder(const EncoderConfig& cfg, ParamRegistry& registry,
                           const std::string& prefix = "encoder");
HeadParams make_head(const HeadConfig& cfg, int d_in, ParamRegistry& registry,
                     const std::string& prefix = "head");

// Per-head attention probabilities copied out for inspection.
struct AttentionCapture {
    std::vector<std::vector<double>> head_probs;  // each [T*T], row-major
    int t_len = 0;
};

// x [T, d] -> [T, d]; scaled dot-product attention over all time steps.
TensorPtr mha_forward(const TensorPtr& x, const MhaParams& params,
                      AttentionCapture* capture = nullptr);

// Post-norm wiring: layer_norm(x + mha(x)), then layer_norm(a + ffn(a)).
TensorPtr encoder_layer(const TensorPtr& x, const EncoderLayerParams& params);

TensorPtr encoder_stack(const TensorPtr& x, const EncoderParams& params);

// Temporal mean, then the fully connected stack; relu between layers,
// none after the last. features [T, d] -> logits [n_classes].
TensorPtr classify_head(const TensorPtr& features, const HeadParams& params);

long long mha_param_count(const EncoderConfig& cfg);
long long encoder_layer_param_count(const EncoderConfig& cfg);
long long encoder_param_count(const EncoderConfig& cfg);
long long head_param_count(int d_in, const HeadConfig& cfg);

}  // namespace mfconvtr
