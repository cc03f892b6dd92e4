#pragma once

#include <string>
#include <vector>

namespace mfconvtr {

enum class Label { normal, arrhythmia };

std::string label_name(Label label);
Label parse_label(const std::string& name);

// Multi-channel abdominal recording as it arrives from disk.
struct RawRecord {
    std::vector<std::vector<double>> channels;  // 4 or 5, equal length
    double fs = 0.0;                            // Hz
    Label label = Label::normal;
    std::string record_id;
};

// Single-channel 100 Hz smoothed signal with the record label.
struct PreprocessedRecord {
    std::vector<double> signal;
    Label label = Label::normal;
    std::string record_id;
};

struct SavgolSpec {
    int window_length = 17;
    int poly_order = 10;
};

// Keeps the first 4 channels; a 5-channel record keeps all 5.
RawRecord select_channels(RawRecord record);

// Linear-interpolation downsampling to fs_out. Output length is
// floor((N-1) * fs_out / fs_in) + 1. The optional low-pass prefilter is
// off by default; without it aliasing above fs_out/2 is not rejected.
std::vector<double> resample_linear(const std::vector<double>& signal, double fs_in,
                                    double fs_out = 100.0, bool lowpass = false);

// Projection of the centered channels onto the top covariance eigenvector,
// sign fixed so the eigenvector entry of largest magnitude is positive.
std::vector<double> pca_first_component(const std::vector<std::vector<double>>& channels);

// (x - mean) / population std; all zeros when std < 1e-8.
std::vector<double> zscore(const std::vector<double>& signal);

// Least-squares polynomial smoothing weights evaluated at the window center.
std::vector<double> savgol_coeffs(const SavgolSpec& spec);

// Correlation with savgol_coeffs; edges mirror-padded, length preserved.
std::vector<double> savgol_filter(const std::vector<double>& signal,
                                  const SavgolSpec& spec);

// select_channels -> resample_linear -> pca_first_component -> zscore
// -> savgol_filter.
PreprocessedRecord preprocess_record(const RawRecord& record,
                                     const SavgolSpec& spec = {});

// CSV + key=value sidecar I/O. Raw CSV holds one column per channel, no
// timestamps; preprocessed CSV is single-column. Sidecar keys: fs (raw
// only), label, record_id.
RawRecord read_raw_record(const std::string& csv_path, const std::string& meta_path);
void write_raw_record(const RawRecord& record, const std::string& csv_path,
                      const std::string& meta_path);
PreprocessedRecord read_preprocessed_record(const std::string& csv_path,
                                            const std::string& meta_path);
void write_preprocessed_record(const PreprocessedRecord& record,
                               const std::string& csv_path,
                               const std::string& meta_path);

}  // namespace mfconvtr
