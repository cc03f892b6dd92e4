#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfconvtr/dsp.hpp"
#include "mfconvtr/rng.hpp"

namespace mfconvtr {

inline constexpr int kWindowLength = 200;  // 2 s at 100 Hz

struct Window {
    std::vector<double> samples;  // exactly kWindowLength
    Label label = Label::normal;
    std::string record_id;
    int start_index = 0;  // sample offset within the parent record
};

struct SplitSpec {
    double train_fraction = 0.5;  // 0.85 for the 85:15 protocol
};

void validate(const SplitSpec& spec);

// Synthetic stand-in for abdominal recordings: a maternal pulse train plus
// a weaker fetal train with per-channel mixing gains and white noise.
// Arrhythmia records jitter the fetal beat intervals multiplicatively.
struct SynthSpec {
    int n_records = 20;
    double duration_s = 60.0;
    double fs = 500.0;
    double maternal_rate_hz = 1.2;
    double fetal_rate_hz = 2.4;
    double noise_std = 0.1;
    double arrhythmia_rr_jitter = 0.3;
};

void validate(const SynthSpec& spec);

// Non-overlapping by default; a shorter stride gives overlapping windows.
// A record shorter than one window yields an empty list.
std::vector<Window> make_windows(const PreprocessedRecord& record,
                                 int stride = kWindowLength);

struct SplitWindows {
    std::vector<Window> train;
    std::vector<Window> test;
};

// Per record, the first floor(fraction * len) samples feed training windows
// and the remainder feeds test windows; no window straddles the boundary.
SplitWindows temporal_split(const std::vector<PreprocessedRecord>& records,
                            const SplitSpec& spec);

// Deterministic under seed. When fetal_beats is given, the fetal beat times
// of each record are copied out for oracle checks.
std::vector<RawRecord> synth_dataset(const SynthSpec& spec, std::uint64_t seed,
                                     std::vector<std::vector<double>>* fetal_beats = nullptr);

// Pulse-train building blocks, exposed so tests can probe them directly.
std::vector<double> synth_beat_times(double rate_hz, double jitter, double duration_s,
                                     Rng& rng);
std::vector<double> synth_pulse_train(const std::vector<double>& beat_times, double fs,
                                      double duration_s, double width_s,
                                      double amplitude);

// Dataset manifest: one "csv_path,meta_path" line per record. Relative
// paths are resolved against the manifest's directory on read.
struct ManifestEntry {
    std::string csv_path;
    std::string meta_path;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

std::vector<RawRecord> load_raw_records(const std::string& manifest_path);

}  // namespace mfconvtr
