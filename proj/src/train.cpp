#include "mfconvtr/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "mfconvtr/errors.hpp"
#include "text_util.hpp"

namespace mfconvtr {

void validate(const TrainConfig& cfg) {
    if (cfg.epochs <= 0) throw ConfigError("epoch count must be positive");
    if (cfg.batch_size <= 0) throw ConfigError("batch size must be positive");
    if (cfg.learning_rate < 0.0) throw ConfigError("learning rate must be non-negative");
    if (cfg.clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
    if (cfg.n_threads <= 0) throw ConfigError("thread count must be positive");
}

namespace {

class Optimizer {
public:
    Optimizer(ParamRegistry& registry, const TrainConfig& cfg)
        : registry_(registry), cfg_(cfg) {
        if (cfg.optimizer == OptimizerKind::adam) {
            for (const auto& entry : registry.entries()) {
                first_moment_.emplace_back(entry.tensor->size(), 0.0);
                second_moment_.emplace_back(entry.tensor->size(), 0.0);
            }
        }
    }

    // Applies one update from the flat gradient sum divided by scale.
    void step(const std::vector<double>& grad_sum, double grad_scale) {
        const auto& entries = registry_.entries();
        std::size_t at = 0;
        if (cfg_.optimizer == OptimizerKind::sgd) {
            for (const auto& entry : entries) {
                double* theta = entry.tensor->data.data();
                for (std::size_t i = 0; i < entry.tensor->size(); ++i, ++at)
                    theta[i] -= cfg_.learning_rate * grad_sum[at] * grad_scale;
            }
            return;
        }
        ++timestep_;
        const double correction1 = 1.0 - std::pow(cfg_.beta1, timestep_);
        const double correction2 = 1.0 - std::pow(cfg_.beta2, timestep_);
        for (std::size_t e = 0; e < entries.size(); ++e) {
            double* theta = entries[e].tensor->data.data();
            double* m = first_moment_[e].data();
            double* v = second_moment_[e].data();
            for (std::size_t i = 0; i < entries[e].tensor->size(); ++i, ++at) {
                const double grad = grad_sum[at] * grad_scale;
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad * grad;
                const double m_hat = m[i] / correction1;
                const double v_hat = v[i] / correction2;
                theta[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.adam_eps);
            }
        }
    }

private:
    ParamRegistry& registry_;
    TrainConfig cfg_;
    long long timestep_ = 0;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
};

double sample_loss_and_backward(const Model& model, const Window& window) {
    auto logits = model.forward(window.samples);
    auto loss = ops::cross_entropy(logits, window.label == Label::arrhythmia ? 1 : 0);
    const double value = loss->value();
    backward(loss);
    return value;
}

std::vector<double> collect_grads(const ParamRegistry& registry) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(registry.total_count()));
    for (const auto& entry : registry.entries())
        flat.insert(flat.end(), entry.tensor->grad.begin(), entry.tensor->grad.end());
    return flat;
}

}  // namespace

TrainResult train(Model& model, const std::vector<Window>& windows,
                  const TrainConfig& cfg) {
    validate(cfg);
    if (windows.empty()) throw DataError("training set is empty");

    Optimizer optimizer(model.registry(), cfg);
    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int worker_count =
        std::min<int>(cfg.n_threads, static_cast<int>(windows.size()));
    std::vector<Model> replicas;
    if (worker_count > 1)
        for (int w = 0; w < worker_count; ++w) replicas.push_back(model.clone());

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::vector<double> grad_sum(static_cast<std::size_t>(model.total_param_count()));
        for (std::size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t batch_end =
                std::min(order.size(), batch_start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t batch_n = batch_end - batch_start;
            std::fill(grad_sum.begin(), grad_sum.end(), 0.0);

            // Per-sample gradients are summed into grad_sum strictly in batch
            // index order, so serial and threaded runs are bit-identical.
            std::vector<double> losses(batch_n, 0.0);
            if (worker_count <= 1 || batch_n == 1) {
                for (std::size_t b = 0; b < batch_n; ++b) {
                    model.registry().zero_grads();
                    losses[b] = sample_loss_and_backward(model, windows[order[batch_start + b]]);
                    const auto flat = collect_grads(model.registry());
                    for (std::size_t i = 0; i < grad_sum.size(); ++i) grad_sum[i] += flat[i];
                }
            } else {
                std::vector<std::vector<double>> sample_grads(batch_n);
                const int active =
                    std::min<int>(worker_count, static_cast<int>(batch_n));
                std::vector<std::thread> pool;
                for (int w = 0; w < active; ++w) {
                    const std::size_t chunk_begin = batch_n * static_cast<std::size_t>(w) /
                                                    static_cast<std::size_t>(active);
                    const std::size_t chunk_end = batch_n * static_cast<std::size_t>(w + 1) /
                                                  static_cast<std::size_t>(active);
                    Model& replica = replicas[static_cast<std::size_t>(w)];
                    replica.copy_parameter_values_from(model);
                    pool.emplace_back([&, chunk_begin, chunk_end, w] {
                        Model& mine = replicas[static_cast<std::size_t>(w)];
                        for (std::size_t b = chunk_begin; b < chunk_end; ++b) {
                            mine.registry().zero_grads();
                            losses[b] =
                                sample_loss_and_backward(mine, windows[order[batch_start + b]]);
                            sample_grads[b] = collect_grads(mine.registry());
                        }
                    });
                }
                for (auto& t : pool) t.join();
                for (std::size_t b = 0; b < batch_n; ++b)
                    for (std::size_t i = 0; i < grad_sum.size(); ++i)
                        grad_sum[i] += sample_grads[b][i];
            }

            for (std::size_t b = 0; b < batch_n; ++b) {
                if (!std::isfinite(losses[b]))
                    throw NumericError("training diverged at epoch " +
                                       std::to_string(epoch + 1) + ", window " +
                                       windows[order[batch_start + b]].record_id);
                epoch_loss += losses[b];
            }
            double grad_scale = 1.0 / static_cast<double>(batch_n);
            if (cfg.clip_norm > 0.0) {
                double norm_sq = 0.0;
                for (double g : grad_sum) norm_sq += g * g;
                const double norm = std::sqrt(norm_sq) * grad_scale;
                if (norm > cfg.clip_norm) grad_scale *= cfg.clip_norm / norm;
            }
            optimizer.step(grad_sum, grad_scale);
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(windows.size()));
    }
    return result;
}

EvalReport score_predictions(const std::vector<int>& predictions,
                             const std::vector<Window>& windows,
                             const EvalOptions& options) {
    if (windows.empty()) throw DataError("evaluation set is empty");
    if (predictions.size() != windows.size())
        throw UsageError("one prediction per window required");

    EvalReport report;
    report.n_windows = static_cast<long long>(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const int actual = windows[i].label == Label::arrhythmia ? 1 : 0;
        report.confusion[actual][predictions[i]] += 1;
    }
    if (options.per_record_average) {
        std::vector<std::string> ids;
        std::vector<long long> correct, total;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto it = std::find(ids.begin(), ids.end(), windows[i].record_id);
            std::size_t at = static_cast<std::size_t>(it - ids.begin());
            if (it == ids.end()) {
                ids.push_back(windows[i].record_id);
                correct.push_back(0);
                total.push_back(0);
            }
            const int actual = windows[i].label == Label::arrhythmia ? 1 : 0;
            total[at] += 1;
            if (predictions[i] == actual) correct[at] += 1;
        }
        double acc = 0.0;
        for (std::size_t r = 0; r < ids.size(); ++r)
            acc += static_cast<double>(correct[r]) / static_cast<double>(total[r]);
        report.accuracy = 100.0 * acc / static_cast<double>(ids.size());
    } else {
        report.accuracy = 100.0 *
                          static_cast<double>(report.confusion[0][0] + report.confusion[1][1]) /
                          static_cast<double>(report.n_windows);
    }
    return report;
}

EvalReport evaluate(const Model& model, const std::vector<Window>& windows,
                    const EvalOptions& options) {
    if (windows.empty()) throw DataError("evaluation set is empty");
    std::vector<int> predictions(windows.size(), 0);
    const int workers =
        std::max(1, std::min<int>(options.n_threads, static_cast<int>(windows.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < windows.size(); ++i)
            predictions[i] = model.predict(windows[i].samples);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            const std::size_t begin =
                windows.size() * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
            const std::size_t end = windows.size() * static_cast<std::size_t>(w + 1) /
                                    static_cast<std::size_t>(workers);
            pool.emplace_back([&, begin, end] {
                for (std::size_t i = begin; i < end; ++i)
                    predictions[i] = model.predict(windows[i].samples);
            });
        }
        for (auto& t : pool) t.join();
    }
    EvalReport report = score_predictions(predictions, windows, options);
    report.param_count = model.total_param_count();
    return report;
}

std::string render_report_text(const EvalReport& report) {
    std::string out;
    out += "accuracy_percent: " + detail::format_double(report.accuracy) + "\n";
    out += "n_windows: " + std::to_string(report.n_windows) + "\n";
    out += "param_count: " + std::to_string(report.param_count) + "\n";
    out += "confusion_matrix (rows actual normal/arrhythmia, columns predicted):\n";
    out += "  " + std::to_string(report.confusion[0][0]) + " " +
           std::to_string(report.confusion[0][1]) + "\n";
    out += "  " + std::to_string(report.confusion[1][0]) + " " +
           std::to_string(report.confusion[1][1]) + "\n";
    return out;
}

std::string render_report_json(const EvalReport& report) {
    nlohmann::json j;
    j["accuracy_percent"] = report.accuracy;
    j["n_windows"] = report.n_windows;
    j["param_count"] = report.param_count;
    j["confusion"] = {{report.confusion[0][0], report.confusion[0][1]},
                      {report.confusion[1][0], report.confusion[1][1]}};
    return j.dump(2) + "\n";
}

namespace {

void write_artifacts(const ExperimentResult& result, const Model& model,
                     const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    detail::write_text((fs::path(out_dir) / "report.txt").string(),
                       render_report_text(result.report));
    detail::write_text((fs::path(out_dir) / "report.json").string(),
                       render_report_json(result.report));

    std::string losses = "epoch,loss\n";
    for (std::size_t e = 0; e < result.training.epoch_loss.size(); ++e)
        losses += std::to_string(e + 1) + "," +
                  detail::format_double(result.training.epoch_loss[e]) + "\n";
    detail::write_text((fs::path(out_dir) / "loss_history.csv").string(), losses);

    std::string confusion;
    confusion += std::to_string(result.report.confusion[0][0]) + "," +
                 std::to_string(result.report.confusion[0][1]) + "\n";
    confusion += std::to_string(result.report.confusion[1][0]) + "," +
                 std::to_string(result.report.confusion[1][1]) + "\n";
    detail::write_text((fs::path(out_dir) / "confusion.csv").string(), confusion);

    save_checkpoint(model, (fs::path(out_dir) / "model.ckpt").string());
}

}  // namespace

ExperimentResult run_experiment(const std::vector<RawRecord>& records,
                                const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                const SplitSpec& split, const std::string& out_dir) {
    std::vector<PreprocessedRecord> preprocessed;
    preprocessed.reserve(records.size());
    for (const auto& record : records) preprocessed.push_back(preprocess_record(record));

    ExperimentResult result;
    auto windows = temporal_split(preprocessed, split);
    result.train_windows = std::move(windows.train);
    result.test_windows = std::move(windows.test);
    if (result.train_windows.empty()) throw DataError("temporal split left no training windows");
    if (result.test_windows.empty()) throw DataError("temporal split left no test windows");

    Model model = build_model(model_cfg);
    result.training = train(model, result.train_windows, train_cfg);
    EvalOptions eval_options;
    eval_options.n_threads = train_cfg.n_threads;
    result.report = evaluate(model, result.test_windows, eval_options);

    if (!out_dir.empty()) write_artifacts(result, model, out_dir);
    return result;
}

ExperimentResult run_experiment(const std::string& manifest_path, const ModelConfig& model_cfg,
                                const TrainConfig& train_cfg, const SplitSpec& split,
                                const std::string& out_dir) {
    return run_experiment(load_raw_records(manifest_path), model_cfg, train_cfg, split,
                          out_dir);
}

std::vector<AblationCell> ablation_grid(int table) {
    std::vector<AblationCell> cells;
    if (table == 2) {
        const std::vector<std::vector<int>> kernel_lists = {
            {1},     {3},        {5},        {15},       {15, 1},       {15, 3},
            {15, 5}, {15, 1, 3}, {15, 3, 5}, {15, 5, 1}, {15, 1, 3, 5},
        };
        for (const auto& kernels : kernel_lists) {
            ModelConfig cfg;
            cfg.backbone.mfconv.kernel_sizes = kernels;
            // The 3-split rows need widths divisible by 3; 120 also keeps
            // d_model divisible by the default 8 heads.
            if (kernels.size() == 3) cfg.backbone.block_channels = {30, 60, 120};
            if (cfg.encoder) cfg.encoder->d_model = cfg.backbone.block_channels.back();
            std::string label = std::to_string(kernels.size()) + " splits, kernels";
            for (int k : kernels) label += " " + std::to_string(k);
            cells.push_back({label, cfg});
        }
    } else if (table == 3) {
        for (int layers : {1, 2, 3})
            for (int heads : {4, 8, 16}) {
                ModelConfig cfg;
                cfg.encoder->n_layers = layers;
                cfg.encoder->n_heads = heads;
                cells.push_back({std::to_string(layers) + " encoders, " +
                                     std::to_string(heads) + " heads",
                                 cfg});
            }
    } else {
        throw ConfigError("ablation grids exist for tables 2 and 3");
    }
    return cells;
}

}  // namespace mfconvtr
