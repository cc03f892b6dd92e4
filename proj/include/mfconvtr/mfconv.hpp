#pragma once

#include <string>
#include <vector>

#include "mfconvtr/params.hpp"
#include "mfconvtr/tensor.hpp"

namespace mfconvtr {

// One multi-frequency convolution: the input is split channel-wise into as
// many groups as there are kernel sizes and each group gets its own
// same-padded convolution. A size-15 kernel may be factorized into stacked
// sub-kernels of 3 and 5, the second dilated by 3 so the receptive field
// stays 15.
struct MFConvConfig {
    std::vector<int> kernel_sizes{15, 5, 3, 1};
    bool factorize_15 = true;
};

struct BackboneConfig {
    std::vector<int> block_channels{32, 64, 128};
    MFConvConfig mfconv;
    int entry_kernel = 1;
};

void validate(const MFConvConfig& cfg, int channels);
void validate(const BackboneConfig& cfg);

struct ConvParams {
    TensorPtr weight;  // [C_out, C_in, k]
    TensorPtr bias;    // [C_out]
    int dilation = 1;
};

struct MFConvBranchParams {
    std::vector<ConvParams> convs;  // one conv, or two when factorized
};

struct MFConvParams {
    std::vector<MFConvBranchParams> branches;
    int channels = 0;
};

struct MFConvBlockParams {
    ConvParams entry;
    MFConvParams mfconv;
};

struct BackboneParams {
    std::vector<MFConvBlockParams> blocks;
};

ConvParams make_conv(const std::string& name, int c_in, int c_out, int kernel,
                     int dilation, ParamRegistry& registry);
MFConvParams make_mfconv(const std::string& name, int channels, const MFConvConfig& cfg,
                         ParamRegistry& registry);
BackboneParams make_backbone(const BackboneConfig& cfg, ParamRegistry& registry,
                             const std::string& prefix = "backbone");

TensorPtr conv_forward(const TensorPtr& x, const ConvParams& conv);

// Channel split -> per-branch convolution -> concatenation, shape preserved.
TensorPtr mfconv_forward(const TensorPtr& x, const MFConvParams& params);

// relu(entry conv), then a residual around the relu'd MFConv output.
TensorPtr mfconv_block(const TensorPtr& x, const MFConvBlockParams& params);

// Three blocks by default: 1 -> 32 -> 64 -> 128 channels, length unchanged.
TensorPtr backbone_forward(const TensorPtr& signal, const BackboneParams& params);

// Closed-form learnable-scalar counts; must agree with a registry walk.
long long conv_param_count(int c_in, int c_out, int kernel);
long long mfconv_param_count(int channels, const MFConvConfig& cfg);
long long mfconv_block_param_count(int c_in, int c_out, const BackboneConfig& cfg);
long long backbone_param_count(const BackboneConfig& cfg);

}  // namespace mfconvtr
