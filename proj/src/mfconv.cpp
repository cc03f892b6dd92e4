#include "mfconvtr/mfconv.hpp"

#include "mfconvtr/errors.hpp"

namespace mfconvtr {

void validate(const MFConvConfig& cfg, int channels) {
    if (cfg.kernel_sizes.empty()) throw ConfigError("mfconv needs at least one kernel size");
    for (int k : cfg.kernel_sizes)
        if (k <= 0 || k % 2 == 0)
            throw ConfigError("mfconv kernel sizes must be odd and positive");
    if (channels % static_cast<int>(cfg.kernel_sizes.size()) != 0)
        throw ConfigError("channel count " + std::to_string(channels) +
                          " is not divisible by the number of splits " +
                          std::to_string(cfg.kernel_sizes.size()));
}

void validate(const BackboneConfig& cfg) {
    if (cfg.block_channels.empty()) throw ConfigError("backbone needs at least one block");
    if (cfg.entry_kernel <= 0 || cfg.entry_kernel % 2 == 0)
        throw ConfigError("entry kernel must be odd and positive");
    int previous = 0;
    for (int width : cfg.block_channels) {
        if (width <= previous)
            throw ConfigError("backbone widths must be strictly increasing");
        previous = width;
        validate(cfg.mfconv, width);
    }
}

ConvParams make_conv(const std::string& name, int c_in, int c_out, int kernel,
                     int dilation, ParamRegistry& registry) {
    ConvParams conv;
    conv.weight = registry.create(name + ".weight", {c_out, c_in, kernel},
                                  InitKind::uniform_fan_in, c_in * kernel);
    conv.bias = registry.create(name + ".bias", {c_out}, InitKind::zeros);
    conv.dilation = dilation;
    return conv;
}

MFConvParams make_mfconv(const std::string& name, int channels, const MFConvConfig& cfg,
                         ParamRegistry& registry) {
    validate(cfg, channels);
    const int splits = static_cast<int>(cfg.kernel_sizes.size());
    const int width = channels / splits;
    MFConvParams params;
    params.channels = channels;
    for (int s = 0; s < splits; ++s) {
        const int kernel = cfg.kernel_sizes[static_cast<std::size_t>(s)];
        const std::string branch = name + ".branch" + std::to_string(s + 1);
        MFConvBranchParams bp;
        if (kernel == 15 && cfg.factorize_15) {
            bp.convs.push_back(make_conv(branch + ".conv1", width, width, 3, 1, registry));
            bp.convs.push_back(make_conv(branch + ".conv2", width, width, 5, 3, registry));
        } else {
            bp.convs.push_back(make_conv(branch + ".conv1", width, width, kernel, 1, registry));
        }
        params.branches.push_back(std::move(bp));
    }
    return params;
}

BackboneParams make_backbone(const BackboneConfig& cfg, ParamRegistry& registry,
                             const std::string& prefix) {
    validate(cfg);
    BackboneParams params;
    int c_in = 1;
    for (std::size_t b = 0; b < cfg.block_channels.size(); ++b) {
        const int c_out = cfg.block_channels[b];
        const std::string name = prefix + ".block" + std::to_string(b + 1);
        MFConvBlockParams block;
        block.entry = make_conv(name + ".entry", c_in, c_out, cfg.entry_kernel, 1, registry);
        block.mfconv = make_mfconv(name + ".mfconv", c_out, cfg.mfconv, registry);
        params.blocks.push_back(std::move(block));
        c_in = c_out;
    }
    return params;
}

TensorPtr conv_forward(const TensorPtr& x, const ConvParams& conv) {
    return ops::conv1d(x, conv.weight, conv.bias, conv.dilation);
}

TensorPtr mfconv_forward(const TensorPtr& x, const MFConvParams& params) {
    if (x->ndim() != 2 || x->dim(0) != params.channels)
        throw ConfigError("mfconv input channel count mismatch");
    const int splits = static_cast<int>(params.branches.size());
    const int width = params.channels / splits;
    if (splits == 1) {
        TensorPtr y = x;
        for (const auto& conv : params.branches.front().convs) y = conv_forward(y, conv);
        return y;
    }
    std::vector<TensorPtr> outputs;
    outputs.reserve(params.branches.size());
    for (int s = 0; s < splits; ++s) {
        TensorPtr part = ops::slice(x, 0, s * width, width);
        for (const auto& conv : params.branches[static_cast<std::size_t>(s)].convs)
            part = conv_forward(part, conv);
        outputs.push_back(std::move(part));
    }
    return ops::concat(outputs, 0);
}

TensorPtr mfconv_block(const TensorPtr& x, const MFConvBlockParams& params) {
    TensorPtr expanded = ops::relu(conv_forward(x, params.entry));
    TensorPtr multi = ops::relu(mfconv_forward(expanded, params.mfconv));
    return ops::add(expanded, multi);
}

TensorPtr backbone_forward(const TensorPtr& signal, const BackboneParams& params) {
    TensorPtr x = signal;
    for (const auto& block : params.blocks) x = mfconv_block(x, block);
    return x;
}

long long conv_param_count(int c_in, int c_out, int kernel) {
    return static_cast<long long>(c_out) * c_in * kernel + c_out;
}

long long mfconv_param_count(int channels, const MFConvConfig& cfg) {
    validate(cfg, channels);
    const int splits = static_cast<int>(cfg.kernel_sizes.size());
    const int width = channels / splits;
    long long total = 0;
    for (int k : cfg.kernel_sizes) {
        if (k == 15 && cfg.factorize_15)
            total += conv_param_count(width, width, 3) + conv_param_count(width, width, 5);
        else
            total += conv_param_count(width, width, k);
    }
    return total;
}

long long mfconv_block_param_count(int c_in, int c_out, const BackboneConfig& cfg) {
    return conv_param_count(c_in, c_out, cfg.entry_kernel) +
           mfconv_param_count(c_out, cfg.mfconv);
}

long long backbone_param_count(const BackboneConfig& cfg) {
    validate(cfg);
    long long total = 0;
    int c_in = 1;
    for (int c_out : cfg.block_channels) {
        total += mfconv_block_param_count(c_in, c_out, cfg);
        c_in = c_out;
    }
    return total;
}

}  // namespace mfconvtr
