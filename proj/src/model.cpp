#include "mfconvtr/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "mfconvtr/errors.hpp"
#include "mfconvtr/transformer.hpp"
#include "text_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

namespace mfconvtr {

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    backbone_ = make_backbone(cfg_.backbone, registry_);
    if (cfg_.encoder) encoder_ = make_encoder(*cfg_.encoder, registry_);
    head_ = make_head(cfg_.head, cfg_.backbone.block_channels.back(), registry_);
    registry_.initialize(cfg_.seed);
}

TensorPtr Model::forward(const TensorPtr& signal) const {
    TensorPtr features = backbone_forward(signal, backbone_);
    TensorPtr sequence = ops::transpose(features);  // [C,T] -> [T,C]
    if (encoder_) sequence = encoder_stack(sequence, *encoder_);
    return classify_head(sequence, head_);
}

TensorPtr Model::forward(const std::vector<double>& window) const {
    auto signal = Tensor::from_data({1, static_cast<int>(window.size())}, window);
    return forward(signal);
}

int Model::predict(const std::vector<double>& window) const {
    auto logits = forward(window);
    return logits->data[1] > logits->data[0] ? 1 : 0;
}

Model Model::clone() const {
    Model copy(cfg_);
    copy.copy_parameter_values_from(*this);
    return copy;
}

void Model::copy_parameter_values_from(const Model& source) {
    const auto& src = source.registry_.entries();
    const auto& dst = registry_.entries();
    if (src.size() != dst.size())
        throw UsageError("parameter copy between incompatible models");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (dst[i].tensor->shape != src[i].tensor->shape)
            throw UsageError("parameter copy between incompatible models");
        dst[i].tensor->data = src[i].tensor->data;
    }
}

Model build_model(const ModelConfig& cfg) { return Model(cfg); }

namespace {

constexpr const char* kCheckpointVersionLine = "mfconvtr checkpoint 1";

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::string header;
    header += kCheckpointVersionLine;
    header += "\n[config]\n";
    header += serialize_model_config(model.config());
    header += "[manifest]\n";
    for (const auto& entry : model.registry().entries()) {
        header += entry.name;
        for (int d : entry.tensor->shape) header += " " + std::to_string(d);
        header += "\n";
    }
    header += "[payload]\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& entry : model.registry().entries())
        out.write(reinterpret_cast<const char*>(entry.tensor->data.data()),
                  static_cast<std::streamsize>(entry.tensor->data.size() * sizeof(double)));
    if (!out) throw DataError("write failed for checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

    const std::string payload_marker = "[payload]\n";
    const std::size_t payload_at = bytes.find(payload_marker);
    if (payload_at == std::string::npos)
        throw CheckpointTruncatedError("checkpoint " + path + " has no payload section");
    const std::string header = bytes.substr(0, payload_at);
    const std::size_t payload_start = payload_at + payload_marker.size();

    std::vector<std::string> lines;
    for (const auto& piece : detail::split(header, '\n')) lines.push_back(piece);
    if (lines.empty() || lines.front() != kCheckpointVersionLine)
        throw CheckpointVersionError("checkpoint " + path + " has an unsupported version");

    std::size_t at = 1;
    if (at >= lines.size() || lines[at] != "[config]")
        throw DataError("checkpoint " + path + " is missing its config echo");
    ++at;
    std::string config_text;
    while (at < lines.size() && lines[at] != "[manifest]") {
        config_text += lines[at];
        config_text.push_back('\n');
        ++at;
    }
    if (at >= lines.size())
        throw DataError("checkpoint " + path + " is missing its manifest");
    ++at;

    Model model(parse_model_config(config_text));

    const auto& entries = model.registry().entries();
    std::size_t entry_index = 0;
    for (; at < lines.size(); ++at) {
        if (detail::trim(lines[at]).empty()) continue;
        const auto cells = detail::split(lines[at], ' ');
        if (entry_index >= entries.size())
            throw CheckpointShapeError("checkpoint " + path +
                                       " lists more parameters than the config builds");
        const auto& entry = entries[entry_index];
        if (cells.front() != entry.name)
            throw CheckpointShapeError("checkpoint parameter " + cells.front() +
                                       " does not match expected " + entry.name);
        std::vector<int> shape;
        for (std::size_t i = 1; i < cells.size(); ++i)
            shape.push_back(static_cast<int>(detail::parse_double(cells[i], path)));
        if (shape != entry.tensor->shape)
            throw CheckpointShapeError("checkpoint shape mismatch for " + entry.name);
        ++entry_index;
    }
    if (entry_index != entries.size())
        throw CheckpointShapeError("checkpoint " + path +
                                   " lists fewer parameters than the config builds");

    const std::size_t expected_bytes =
        static_cast<std::size_t>(model.total_param_count()) * sizeof(double);
    const std::size_t available = bytes.size() - payload_start;
    if (available < expected_bytes)
        throw CheckpointTruncatedError("checkpoint " + path + " payload is truncated");
    if (available > expected_bytes)
        throw DataError("checkpoint " + path + " has trailing payload bytes");

    const char* cursor = bytes.data() + payload_start;
    for (const auto& entry : entries) {
        std::memcpy(entry.tensor->data.data(), cursor,
                    entry.tensor->data.size() * sizeof(double));
        cursor += entry.tensor->data.size() * sizeof(double);
    }
    return model;
}

}  // namespace mfconvtr
