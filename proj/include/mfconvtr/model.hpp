#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfconvtr/config.hpp"
#include "mfconvtr/params.hpp"

namespace mfconvtr {

// Assembled network: backbone -> (transpose, encoder stack) -> classifier.
// Inference on a const model is thread-safe; training mutates parameters
// and needs exclusive access.
class Model {
public:
    explicit Model(const ModelConfig& cfg);

    Model(Model&&) = default;
    Model& operator=(Model&&) = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& registry() { return registry_; }
    const ParamRegistry& registry() const { return registry_; }
    long long total_param_count() const { return registry_.total_count(); }

    TensorPtr forward(const TensorPtr& signal) const;  // [1,T] -> logits [2]
    TensorPtr forward(const std::vector<double>& window) const;
    int predict(const std::vector<double>& window) const;

    // Same config, parameter values copied from this instance.
    Model clone() const;
    void copy_parameter_values_from(const Model& source);

private:
    ModelConfig cfg_;
    ParamRegistry registry_;
    BackboneParams backbone_;
    std::optional<EncoderParams> encoder_;
    HeadParams head_;
};

Model build_model(const ModelConfig& cfg);

// Text manifest + little-endian float64 payload; save -> load round-trips
// bit-identically. Loading rebuilds the model from the echoed config and
// validates the manifest against it.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace mfconvtr
