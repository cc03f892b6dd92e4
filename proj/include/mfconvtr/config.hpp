#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mfconvtr/mfconv.hpp"
#include "mfconvtr/transformer.hpp"

namespace mfconvtr {

// Full declarative description of a model; the seed pins initialization.
struct ModelConfig {
    BackboneConfig backbone;
    std::optional<EncoderConfig> encoder = EncoderConfig{};
    HeadConfig head;
    std::uint64_t seed = 42;
};

void validate(const ModelConfig& cfg);

// Plain-text sections: [model], [backbone], [encoder] (omitted for
// backbone-only variants), [head]. Unknown sections and keys are rejected.
ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::string& path);
std::string serialize_model_config(const ModelConfig& cfg);

}  // namespace mfconvtr
