#include "mfconvtr/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mfconvtr/errors.hpp"
#include "text_util.hpp"

namespace mfconvtr {

void validate(const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("train fraction must lie strictly between 0 and 1");
}

void validate(const SynthSpec& spec) {
    if (spec.n_records <= 0) throw ConfigError("synth needs at least one record");
    if (spec.duration_s <= 0.0 || spec.fs <= 0.0)
        throw ConfigError("synth duration and rate must be positive");
    if (spec.maternal_rate_hz <= 0.0 || spec.fetal_rate_hz <= 0.0)
        throw ConfigError("synth beat rates must be positive");
    if (spec.noise_std < 0.0 || spec.arrhythmia_rr_jitter < 0.0)
        throw ConfigError("synth noise and jitter must be non-negative");
    if (spec.arrhythmia_rr_jitter >= 1.0)
        throw ConfigError("rr jitter must stay below 1 to keep intervals positive");
}

namespace {

std::vector<Window> windows_of_range(const PreprocessedRecord& record, std::size_t from,
                                     std::size_t to, int stride) {
    std::vector<Window> out;
    if (stride <= 0) throw ConfigError("window stride must be positive");
    std::size_t start = from;
    while (start + kWindowLength <= to) {
        Window w;
        w.samples.assign(record.signal.begin() + static_cast<std::ptrdiff_t>(start),
                         record.signal.begin() +
                             static_cast<std::ptrdiff_t>(start + kWindowLength));
        w.label = record.label;
        w.record_id = record.record_id;
        w.start_index = static_cast<int>(start);
        out.push_back(std::move(w));
        start += static_cast<std::size_t>(stride);
    }
    return out;
}

}  // namespace

std::vector<Window> make_windows(const PreprocessedRecord& record, int stride) {
    return windows_of_range(record, 0, record.signal.size(), stride);
}

SplitWindows temporal_split(const std::vector<PreprocessedRecord>& records,
                            const SplitSpec& spec) {
    validate(spec);
    SplitWindows out;
    for (const auto& record : records) {
        const std::size_t boundary = static_cast<std::size_t>(
            std::floor(spec.train_fraction * static_cast<double>(record.signal.size())));
        auto train = windows_of_range(record, 0, boundary, kWindowLength);
        auto test = windows_of_range(record, boundary, record.signal.size(), kWindowLength);
        std::move(train.begin(), train.end(), std::back_inserter(out.train));
        std::move(test.begin(), test.end(), std::back_inserter(out.test));
    }
    return out;
}

std::vector<double> synth_beat_times(double rate_hz, double jitter, double duration_s,
                                     Rng& rng) {
    const double base = 1.0 / rate_hz;
    std::vector<double> times;
    double t = rng.uniform(0.0, base);  // random phase
    while (t < duration_s) {
        times.push_back(t);
        // Signed multiplicative deviation with magnitude in [jitter/2, jitter]
        // so every jittered interval sits measurably off the nominal one.
        const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        const double magnitude = jitter == 0.0 ? 0.0 : rng.uniform(0.5 * jitter, jitter);
        t += base * (1.0 + sign * magnitude);
    }
    return times;
}

std::vector<double> synth_pulse_train(const std::vector<double>& beat_times, double fs,
                                      double duration_s, double width_s,
                                      double amplitude) {
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * fs));
    std::vector<double> out(n, 0.0);
    const double support = 4.0 * width_s;
    for (double beat : beat_times) {
        const long long lo =
            std::max(0LL, static_cast<long long>(std::ceil((beat - support) * fs)));
        const long long hi = std::min(static_cast<long long>(n) - 1,
                                      static_cast<long long>(std::floor((beat + support) * fs)));
        for (long long i = lo; i <= hi; ++i) {
            const double dt = static_cast<double>(i) / fs - beat;
            out[static_cast<std::size_t>(i)] +=
                amplitude * std::exp(-dt * dt / (2.0 * width_s * width_s));
        }
    }
    return out;
}

std::vector<RawRecord> synth_dataset(const SynthSpec& spec, std::uint64_t seed,
                                     std::vector<std::vector<double>>* fetal_beats) {
    validate(spec);
    // Broad maternal bumps against sharp, weaker fetal spikes; the classes
    // differ only in fetal beat-interval jitter.
    constexpr double kMaternalAmplitude = 1.0;
    constexpr double kFetalAmplitude = 0.9;
    constexpr double kMaternalWidth = 0.04;  // seconds
    constexpr double kFetalWidth = 0.02;

    Rng rng(seed);
    std::vector<RawRecord> records;
    if (fetal_beats) fetal_beats->clear();
    for (int r = 0; r < spec.n_records; ++r) {
        const Label label = r % 2 == 0 ? Label::normal : Label::arrhythmia;
        const double jitter = label == Label::arrhythmia ? spec.arrhythmia_rr_jitter : 0.0;

        const auto maternal_times =
            synth_beat_times(spec.maternal_rate_hz, 0.0, spec.duration_s, rng);
        const auto fetal_times =
            synth_beat_times(spec.fetal_rate_hz, jitter, spec.duration_s, rng);
        if (fetal_beats) fetal_beats->push_back(fetal_times);

        const auto maternal = synth_pulse_train(maternal_times, spec.fs, spec.duration_s,
                                                kMaternalWidth, kMaternalAmplitude);
        const auto fetal = synth_pulse_train(fetal_times, spec.fs, spec.duration_s,
                                             kFetalWidth, kFetalAmplitude);

        RawRecord record;
        record.fs = spec.fs;
        record.label = label;
        record.record_id = "synth" + std::to_string(r + 1);
        for (int c = 0; c < 4; ++c) {
            const double maternal_gain = rng.uniform(0.6, 1.4);
            const double fetal_gain = rng.uniform(0.6, 1.4);
            std::vector<double> channel(maternal.size());
            for (std::size_t i = 0; i < channel.size(); ++i)
                channel[i] = maternal_gain * maternal[i] + fetal_gain * fetal[i] +
                             (spec.noise_std > 0.0 ? spec.noise_std * rng.normal() : 0.0);
            record.channels.push_back(std::move(channel));
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path base = fs::path(path).parent_path();
    std::vector<ManifestEntry> entries;
    for (const auto& line : detail::read_lines(path)) {
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const auto cells = detail::split(trimmed, ',');
        if (cells.size() != 2)
            throw DataError("manifest line needs 'csv_path,meta_path': " + trimmed);
        auto resolve = [&](const std::string& p) {
            const fs::path candidate(detail::trim(p));
            return candidate.is_absolute() ? candidate.string() : (base / candidate).string();
        };
        entries.push_back({resolve(cells[0]), resolve(cells[1])});
    }
    return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::string text;
    for (const auto& e : entries) text += e.csv_path + "," + e.meta_path + "\n";
    detail::write_text(path, text);
}

std::vector<RawRecord> load_raw_records(const std::string& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    if (entries.empty()) throw DataError("no records in manifest " + manifest_path);
    std::vector<RawRecord> records;
    records.reserve(entries.size());
    for (const auto& e : entries) records.push_back(read_raw_record(e.csv_path, e.meta_path));
    return records;
}

}  // namespace mfconvtr
