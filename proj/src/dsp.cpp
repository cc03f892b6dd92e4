#include "mfconvtr/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mfconvtr/errors.hpp"
#include "text_util.hpp"

namespace mfconvtr {

namespace {

// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
// eigenvalues and column eigenvectors.
void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& values,
                  std::vector<double>& vectors) {
    vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) vectors[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto at = [&](std::vector<double>& m, int r, int c) -> double& {
        return m[static_cast<std::size_t>(r) * n + c];
    };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(a, p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = at(a, i, p), aiq = at(a, i, q);
                    at(a, i, p) = c * aip - s * aiq;
                    at(a, i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = at(a, p, i), aqi = at(a, q, i);
                    at(a, p, i) = c * api - s * aqi;
                    at(a, q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = at(vectors, i, p), viq = at(vectors, i, q);
                    at(vectors, i, p) = c * vip - s * viq;
                    at(vectors, i, q) = s * vip + c * viq;
                }
            }
        }
    }
    values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = at(a, i, i);
}

// Gaussian elimination with partial pivoting; solves in place.
std::vector<double> solve_linear(std::vector<double> m, std::vector<double> rhs, int n) {
    auto at = [&](int r, int c) -> double& {
        return m[static_cast<std::size_t>(r) * n + c];
    };
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(at(r, col)) > std::abs(at(pivot, col))) pivot = r;
        if (std::abs(at(pivot, col)) < 1e-300)
            throw NumericError("singular system in polynomial fit");
        if (pivot != col) {
            for (int c = 0; c < n; ++c) std::swap(at(pivot, c), at(col, c));
            std::swap(rhs[static_cast<std::size_t>(pivot)], rhs[static_cast<std::size_t>(col)]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = at(r, col) / at(col, col);
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) at(r, c) -= f * at(col, c);
            rhs[static_cast<std::size_t>(r)] -= f * rhs[static_cast<std::size_t>(col)];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int r = n - 1; r >= 0; --r) {
        double acc = rhs[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) acc -= at(r, c) * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = acc / at(r, r);
    }
    return x;
}

double mirror_sample(const std::vector<double>& x, long long i) {
    const long long n = static_cast<long long>(x.size());
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return x[static_cast<std::size_t>(i)];
}

std::vector<double> correlate_mirror(const std::vector<double>& signal,
                                     const std::vector<double>& kernel) {
    const int k = static_cast<int>(kernel.size());
    const int half = (k - 1) / 2;
    std::vector<double> out(signal.size());
    for (std::size_t t = 0; t < signal.size(); ++t) {
        double acc = 0.0;
        for (int j = 0; j < k; ++j)
            acc += kernel[static_cast<std::size_t>(j)] *
                   mirror_sample(signal, static_cast<long long>(t) + j - half);
        out[t] = acc;
    }
    return out;
}

}  // namespace

std::string label_name(Label label) {
    return label == Label::normal ? "normal" : "arrhythmia";
}

Label parse_label(const std::string& name) {
    if (name == "normal") return Label::normal;
    if (name == "arrhythmia") return Label::arrhythmia;
    throw DataError("unknown label '" + name + "'");
}

RawRecord select_channels(RawRecord record) {
    if (record.channels.size() < 4)
        throw DataError("record " + record.record_id + " has fewer than 4 channels");
    if (record.channels.size() != 5) record.channels.resize(4);
    return record;
}

std::vector<double> resample_linear(const std::vector<double>& signal, double fs_in,
                                    double fs_out, bool lowpass) {
    if (fs_in <= 0.0 || fs_out <= 0.0) throw ConfigError("sampling rates must be positive");
    if (fs_in < fs_out)
        throw ConfigError("upsampling is unsupported (fs_in < fs_out)");
    if (signal.empty()) return {};

    const std::vector<double>* src = &signal;
    std::vector<double> filtered;
    if (lowpass && fs_in > fs_out) {
        // Hamming-windowed sinc, cutoff 0.45 * fs_out, unity DC gain.
        const int taps = 63;
        const int half = taps / 2;
        const double fc = 0.45 * fs_out / fs_in;
        std::vector<double> kernel(static_cast<std::size_t>(taps));
        double ksum = 0.0;
        for (int i = 0; i < taps; ++i) {
            const int m = i - half;
            const double sinc =
                m == 0 ? 2.0 * fc
                       : std::sin(2.0 * M_PI * fc * m) / (M_PI * m);
            const double window = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (taps - 1));
            kernel[static_cast<std::size_t>(i)] = sinc * window;
            ksum += kernel[static_cast<std::size_t>(i)];
        }
        for (double& v : kernel) v /= ksum;
        filtered = correlate_mirror(signal, kernel);
        src = &filtered;
    }

    const double ratio = fs_in / fs_out;
    const std::size_t n = src->size();
    const std::size_t out_len =
        static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) / ratio + 1e-9)) + 1;
    std::vector<double> out(out_len);
    for (std::size_t k = 0; k < out_len; ++k) {
        const double pos = std::min(static_cast<double>(k) * ratio,
                                    static_cast<double>(n - 1));
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        out[k] = frac == 0.0 || i + 1 >= n
                     ? (*src)[i]
                     : (*src)[i] + frac * ((*src)[i + 1] - (*src)[i]);
    }
    return out;
}

std::vector<double> pca_first_component(const std::vector<std::vector<double>>& channels) {
    const int c = static_cast<int>(channels.size());
    if (c < 2) throw DataError("PCA needs at least 2 channels");
    const std::size_t n = channels.front().size();
    for (const auto& ch : channels)
        if (ch.size() != n) throw DataError("PCA channels must have equal length");
    if (n <= static_cast<std::size_t>(c))
        throw DataError("PCA needs more samples than channels");

    std::vector<std::vector<double>> centered(channels.size());
    for (int i = 0; i < c; ++i) {
        double mean = 0.0;
        for (double v : channels[static_cast<std::size_t>(i)]) mean += v;
        mean /= static_cast<double>(n);
        centered[static_cast<std::size_t>(i)].resize(n);
        for (std::size_t t = 0; t < n; ++t)
            centered[static_cast<std::size_t>(i)][t] =
                channels[static_cast<std::size_t>(i)][t] - mean;
    }

    std::vector<double> cov(static_cast<std::size_t>(c) * c, 0.0);
    double total = 0.0;
    for (int i = 0; i < c; ++i) {
        for (int j = i; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < n; ++t)
                acc += centered[static_cast<std::size_t>(i)][t] *
                       centered[static_cast<std::size_t>(j)][t];
            acc /= static_cast<double>(n);
            cov[static_cast<std::size_t>(i) * c + j] = acc;
            cov[static_cast<std::size_t>(j) * c + i] = acc;
            total += std::abs(acc);
        }
    }
    if (total < 1e-24) throw DataError("PCA over all-constant channels");

    std::vector<double> values, vectors;
    jacobi_eigen(cov, c, values, vectors);
    int top = 0;
    for (int i = 1; i < c; ++i)
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(top)]) top = i;

    std::vector<double> axis(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i)
        axis[static_cast<std::size_t>(i)] = vectors[static_cast<std::size_t>(i) * c + top];
    int biggest = 0;
    for (int i = 1; i < c; ++i)
        if (std::abs(axis[static_cast<std::size_t>(i)]) >
            std::abs(axis[static_cast<std::size_t>(biggest)]))
            biggest = i;
    if (axis[static_cast<std::size_t>(biggest)] < 0.0)
        for (double& v : axis) v = -v;

    std::vector<double> out(n, 0.0);
    for (int i = 0; i < c; ++i) {
        const double w = axis[static_cast<std::size_t>(i)];
        const auto& row = centered[static_cast<std::size_t>(i)];
        for (std::size_t t = 0; t < n; ++t) out[t] += w * row[t];
    }
    return out;
}

std::vector<double> zscore(const std::vector<double>& signal) {
    if (signal.size() < 2) throw DataError("zscore needs at least 2 samples");
    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= static_cast<double>(signal.size());
    double var = 0.0;
    for (double v : signal) var += (v - mean) * (v - mean);
    var /= static_cast<double>(signal.size());
    const double sd = std::sqrt(var);
    std::vector<double> out(signal.size());
    if (sd < 1e-8) return out;  // degenerate constant signal
    for (std::size_t i = 0; i < signal.size(); ++i) out[i] = (signal[i] - mean) / sd;
    return out;
}

std::vector<double> savgol_coeffs(const SavgolSpec& spec) {
    const int w = spec.window_length;
    const int p = spec.poly_order;
    if (w < 1 || w % 2 == 0) throw ConfigError("savgol window must be odd and positive");
    if (p < 0 || p >= w) throw ConfigError("savgol order must be below the window length");

    // Normal equations of degree-p fitting on abscissae scaled to [-1, 1];
    // the scaling leaves the value-at-zero weights unchanged and keeps the
    // Gram matrix well conditioned up to order 10.
    const int half = (w - 1) / 2;
    const int cols = p + 1;
    const double scale = half > 0 ? static_cast<double>(half) : 1.0;
    std::vector<double> design(static_cast<std::size_t>(w) * cols);
    for (int i = 0; i < w; ++i) {
        const double x = static_cast<double>(i - half) / scale;
        double pw = 1.0;
        for (int c = 0; c < cols; ++c) {
            design[static_cast<std::size_t>(i) * cols + c] = pw;
            pw *= x;
        }
    }
    std::vector<double> gram(static_cast<std::size_t>(cols) * cols, 0.0);
    for (int a = 0; a < cols; ++a)
        for (int b = 0; b < cols; ++b) {
            double acc = 0.0;
            for (int i = 0; i < w; ++i)
                acc += design[static_cast<std::size_t>(i) * cols + a] *
                       design[static_cast<std::size_t>(i) * cols + b];
            gram[static_cast<std::size_t>(a) * cols + b] = acc;
        }
    std::vector<double> rhs(static_cast<std::size_t>(cols), 0.0);
    rhs[0] = 1.0;
    const std::vector<double> z = solve_linear(std::move(gram), std::move(rhs), cols);

    std::vector<double> weights(static_cast<std::size_t>(w), 0.0);
    for (int i = 0; i < w; ++i)
        for (int c = 0; c < cols; ++c)
            weights[static_cast<std::size_t>(i)] +=
                design[static_cast<std::size_t>(i) * cols + c] * z[static_cast<std::size_t>(c)];
    return weights;
}

std::vector<double> savgol_filter(const std::vector<double>& signal,
                                  const SavgolSpec& spec) {
    if (signal.size() < static_cast<std::size_t>(spec.window_length))
        throw DataError("signal shorter than the smoothing window");
    return correlate_mirror(signal, savgol_coeffs(spec));
}

PreprocessedRecord preprocess_record(const RawRecord& record, const SavgolSpec& spec) {
    RawRecord selected = select_channels(record);
    std::vector<std::vector<double>> resampled;
    resampled.reserve(selected.channels.size());
    for (const auto& ch : selected.channels)
        resampled.push_back(resample_linear(ch, selected.fs));
    const std::vector<double> principal = pca_first_component(resampled);
    const std::vector<double> normalized = zscore(principal);
    PreprocessedRecord out;
    out.signal = savgol_filter(normalized, spec);
    out.label = record.label;
    out.record_id = record.record_id;
    return out;
}

namespace {

struct Sidecar {
    double fs = 0.0;
    bool has_fs = false;
    Label label = Label::normal;
    std::string record_id;
};

Sidecar read_sidecar(const std::string& path) {
    Sidecar meta;
    bool has_label = false;
    for (const auto& raw_line : detail::read_lines(path)) {
        const std::string line = detail::trim(raw_line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("malformed line '" + line + "' in " + path);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "fs") {
            meta.fs = detail::parse_double(value, path);
            meta.has_fs = true;
        } else if (key == "label") {
            meta.label = parse_label(value);
            has_label = true;
        } else if (key == "record_id") {
            meta.record_id = value;
        } else {
            throw DataError("unknown sidecar key '" + key + "' in " + path);
        }
    }
    if (!has_label) throw DataError("sidecar " + path + " is missing a label");
    if (meta.record_id.empty()) throw DataError("sidecar " + path + " is missing record_id");
    return meta;
}

}  // namespace

RawRecord read_raw_record(const std::string& csv_path, const std::string& meta_path) {
    const Sidecar meta = read_sidecar(meta_path);
    if (!meta.has_fs || meta.fs <= 0.0)
        throw DataError("sidecar " + meta_path + " needs a positive fs");

    RawRecord record;
    record.fs = meta.fs;
    record.label = meta.label;
    record.record_id = meta.record_id;
    for (const auto& line : detail::read_lines(csv_path)) {
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (record.channels.empty()) record.channels.resize(cells.size());
        if (cells.size() != record.channels.size())
            throw DataError("ragged CSV row in " + csv_path);
        for (std::size_t c = 0; c < cells.size(); ++c)
            record.channels[c].push_back(detail::parse_double(detail::trim(cells[c]), csv_path));
    }
    if (record.channels.size() < 4 || record.channels.size() > 5)
        throw DataError("record " + record.record_id + " must have 4 or 5 channels, got " +
                        std::to_string(record.channels.size()));
    if (record.channels.front().empty()) throw DataError("empty record in " + csv_path);
    return record;
}

void write_raw_record(const RawRecord& record, const std::string& csv_path,
                      const std::string& meta_path) {
    std::string csv;
    const std::size_t n = record.channels.empty() ? 0 : record.channels.front().size();
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < record.channels.size(); ++c) {
            if (c) csv.push_back(',');
            csv += detail::format_double(record.channels[c][t]);
        }
        csv.push_back('\n');
    }
    detail::write_text(csv_path, csv);
    detail::write_text(meta_path, "fs=" + detail::format_double(record.fs) +
                                      "\nlabel=" + label_name(record.label) +
                                      "\nrecord_id=" + record.record_id + "\n");
}

PreprocessedRecord read_preprocessed_record(const std::string& csv_path,
                                            const std::string& meta_path) {
    const Sidecar meta = read_sidecar(meta_path);
    PreprocessedRecord record;
    record.label = meta.label;
    record.record_id = meta.record_id;
    for (const auto& line : detail::read_lines(csv_path)) {
        const std::string cell = detail::trim(line);
        if (cell.empty()) continue;
        record.signal.push_back(detail::parse_double(cell, csv_path));
    }
    return record;
}

void write_preprocessed_record(const PreprocessedRecord& record,
                               const std::string& csv_path,
                               const std::string& meta_path) {
    std::string csv;
    for (double v : record.signal) {
        csv += detail::format_double(v);
        csv.push_back('\n');
    }
    detail::write_text(csv_path, csv);
    detail::write_text(meta_path, "label=" + label_name(record.label) +
                                      "\nrecord_id=" + record.record_id + "\n");
}

}  // namespace mfconvtr
