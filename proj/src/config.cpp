#include "mfconvtr/config.hpp"

#include <map>

#include "mfconvtr/errors.hpp"
#include "text_util.hpp"

namespace mfconvtr {

void validate(const ModelConfig& cfg) {
    validate(cfg.backbone);
    validate(cfg.head);
    if (cfg.encoder) {
        validate(*cfg.encoder);
        if (cfg.encoder->d_model != cfg.backbone.block_channels.back())
            throw ConfigError("encoder d_model must equal the last backbone width");
    }
}

namespace {

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> parse_sections(const std::string& text) {
    std::map<std::string, Section> sections;
    std::string current;
    std::size_t line_no = 0;
    std::string line;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = text.find('\n', pos);
        line = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = end == std::string::npos ? text.size() + 1 : end + 1;
        ++line_no;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#' || trimmed.front() == ';') continue;
        if (trimmed.front() == '[') {
            if (trimmed.back() != ']')
                throw ConfigError("malformed section header at line " + std::to_string(line_no));
            current = trimmed.substr(1, trimmed.size() - 2);
            if (sections.count(current))
                throw ConfigError("duplicate section [" + current + "]");
            sections[current] = {};
            continue;
        }
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        if (current.empty())
            throw ConfigError("key outside any section at line " + std::to_string(line_no));
        const std::string key = detail::trim(trimmed.substr(0, eq));
        if (sections[current].count(key))
            throw ConfigError("duplicate key '" + key + "' in [" + current + "]");
        sections[current][key] = detail::trim(trimmed.substr(eq + 1));
    }
    return sections;
}

int parse_int(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError("key " + key + " needs an integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key " + key + " needs true/false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    for (const auto& cell : detail::split(value, ','))
        out.push_back(parse_int(detail::trim(cell), key));
    return out;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(values[i]);
    }
    return out;
}

// Consumes keys so leftovers can be rejected.
class SectionReader {
public:
    SectionReader(Section section, std::string name)
        : section_(std::move(section)), name_(std::move(name)) {}

    std::optional<std::string> take(const std::string& key) {
        auto it = section_.find(key);
        if (it == section_.end()) return std::nullopt;
        std::string value = it->second;
        section_.erase(it);
        return value;
    }

    void finish() const {
        if (!section_.empty())
            throw ConfigError("unknown key '" + section_.begin()->first + "' in [" +
                              name_ + "]");
    }

private:
    Section section_;
    std::string name_;
};

}  // namespace

ModelConfig parse_model_config(const std::string& text) {
    auto sections = parse_sections(text);
    ModelConfig cfg;
    cfg.encoder.reset();

    for (const auto& [name, _] : sections)
        if (name != "model" && name != "backbone" && name != "encoder" && name != "head")
            throw ConfigError("unknown section [" + name + "]");

    if (sections.count("model")) {
        SectionReader r(sections["model"], "model");
        if (auto v = r.take("seed")) {
            try {
                cfg.seed = std::stoull(*v);
            } catch (const std::exception&) {
                throw ConfigError("seed needs an unsigned integer, got '" + *v + "'");
            }
        }
        r.finish();
    }
    if (sections.count("backbone")) {
        SectionReader r(sections["backbone"], "backbone");
        if (auto v = r.take("block_channels"))
            cfg.backbone.block_channels = parse_int_list(*v, "block_channels");
        if (auto v = r.take("kernel_sizes"))
            cfg.backbone.mfconv.kernel_sizes = parse_int_list(*v, "kernel_sizes");
        if (auto v = r.take("factorize_15"))
            cfg.backbone.mfconv.factorize_15 = parse_bool(*v, "factorize_15");
        if (auto v = r.take("entry_kernel"))
            cfg.backbone.entry_kernel = parse_int(*v, "entry_kernel");
        r.finish();
    }
    if (sections.count("encoder")) {
        EncoderConfig enc;
        SectionReader r(sections["encoder"], "encoder");
        if (auto v = r.take("n_layers")) enc.n_layers = parse_int(*v, "n_layers");
        if (auto v = r.take("n_heads")) enc.n_heads = parse_int(*v, "n_heads");
        if (auto v = r.take("d_model")) enc.d_model = parse_int(*v, "d_model");
        if (auto v = r.take("d_ff")) enc.d_ff = parse_int(*v, "d_ff");
        if (auto v = r.take("positional_encoding"))
            enc.positional_encoding = parse_bool(*v, "positional_encoding");
        r.finish();
        cfg.encoder = enc;
    }
    if (sections.count("head")) {
        SectionReader r(sections["head"], "head");
        if (auto v = r.take("fc_widths")) cfg.head.fc_widths = parse_int_list(*v, "fc_widths");
        r.finish();
    }

    validate(cfg);
    return cfg;
}

ModelConfig load_model_config(const std::string& path) {
    std::string text;
    for (const auto& line : detail::read_lines(path)) {
        text += line;
        text.push_back('\n');
    }
    return parse_model_config(text);
}

std::string serialize_model_config(const ModelConfig& cfg) {
    std::string out;
    out += "[model]\nseed = " + std::to_string(cfg.seed) + "\n\n";
    out += "[backbone]\n";
    out += "block_channels = " + join_ints(cfg.backbone.block_channels) + "\n";
    out += "kernel_sizes = " + join_ints(cfg.backbone.mfconv.kernel_sizes) + "\n";
    out += std::string("factorize_15 = ") +
           (cfg.backbone.mfconv.factorize_15 ? "true" : "false") + "\n";
    out += "entry_kernel = " + std::to_string(cfg.backbone.entry_kernel) + "\n\n";
    if (cfg.encoder) {
        out += "[encoder]\n";
        out += "n_layers = " + std::to_string(cfg.encoder->n_layers) + "\n";
        out += "n_heads = " + std::to_string(cfg.encoder->n_heads) + "\n";
        out += "d_model = " + std::to_string(cfg.encoder->d_model) + "\n";
        out += "d_ff = " + std::to_string(cfg.encoder->d_ff) + "\n";
        out += std::string("positional_encoding = ") +
               (cfg.encoder->positional_encoding ? "true" : "false") + "\n\n";
    }
    out += "[head]\nfc_widths = " + join_ints(cfg.head.fc_widths) + "\n";
    return out;
}

}  // namespace mfconvtr
