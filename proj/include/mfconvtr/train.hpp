#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfconvtr/data.hpp"
#include "mfconvtr/model.hpp"

namespace mfconvtr {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // Global-norm gradient clipping; 0 disables it.
    double clip_norm = 5.0;
    // Batch elements may be evaluated on this many threads; per-sample
    // gradients are reduced in batch index order, so the result is
    // bit-identical to the single-threaded run.
    int n_threads = 1;
};

void validate(const TrainConfig& cfg);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean training loss per epoch
};

struct EvalOptions {
    bool per_record_average = false;  // mean of per-record accuracies instead
    int n_threads = 1;
};

struct EvalReport {
    double accuracy = 0.0;           // percent
    long long confusion[2][2] = {};  // [actual][predicted]
    long long n_windows = 0;
    long long param_count = 0;
};

// Mini-batch cross-entropy training, shuffled per epoch from the seed.
// Aborts with NumericError when the loss turns non-finite.
TrainResult train(Model& model, const std::vector<Window>& windows,
                  const TrainConfig& cfg);

EvalReport evaluate(const Model& model, const std::vector<Window>& windows,
                    const EvalOptions& options = {});

// Scoring shared with evaluate(); lets tests feed oracle predictions.
EvalReport score_predictions(const std::vector<int>& predictions,
                             const std::vector<Window>& windows,
                             const EvalOptions& options = {});

struct ExperimentResult {
    EvalReport report;
    TrainResult training;
    std::vector<Window> train_windows;
    std::vector<Window> test_windows;
};

// preprocess -> temporal split -> window -> train -> evaluate. Writes
// report.txt, report.json, loss_history.csv, confusion.csv and model.ckpt
// under out_dir (skipped when out_dir is empty).
ExperimentResult run_experiment(const std::string& manifest_path, const ModelConfig& model_cfg,
                                const TrainConfig& train_cfg, const SplitSpec& split,
                                const std::string& out_dir);

ExperimentResult run_experiment(const std::vector<RawRecord>& records,
                                const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                const SplitSpec& split, const std::string& out_dir);

std::string render_report_text(const EvalReport& report);
std::string render_report_json(const EvalReport& report);

struct AblationCell {
    std::string label;
    ModelConfig config;
};

// The published ablation grids: table 2 sweeps splits/kernel lists (the
// 3-way rows use the nearest widths divisible by 3), table 3 sweeps
// encoder-layer and attention-head counts.
std::vector<AblationCell> ablation_grid(int table);

}  // namespace mfconvtr
