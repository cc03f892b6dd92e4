#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mfconvtr/data.hpp"
#include "mfconvtr/errors.hpp"
#include "mfconvtr/reference_counts.hpp"
#include "mfconvtr/rng.hpp"
#include "mfconvtr/train.hpp"
#include "mfconvtr/transformer.hpp"

namespace fs = std::filesystem;
using namespace mfconvtr;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitUsage = 5;

ModelConfig resolve_model_config(const std::string& config_path, std::uint64_t seed,
                                 bool seed_given) {
    ModelConfig cfg =
        config_path.empty() ? ModelConfig{} : load_model_config(config_path);
    if (seed_given) cfg.seed = seed;
    return cfg;
}

double parse_split(const std::string& value) {
    if (value == "50") return 0.5;
    if (value == "85") return 0.85;
    try {
        const double f = std::stod(value);
        validate(SplitSpec{f});
        return f;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("--split takes 50, 85 or a fraction in (0,1)");
    }
}

void echo_model_config(const ModelConfig& cfg) {
    std::cout << "# resolved model config\n" << serialize_model_config(cfg) << "\n";
}

void echo_train_config(const TrainConfig& cfg, double split_fraction) {
    std::cout << "# resolved training config\n"
              << "epochs = " << cfg.epochs << "\n"
              << "batch_size = " << cfg.batch_size << "\n"
              << "learning_rate = " << cfg.learning_rate << "\n"
              << "optimizer = " << (cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd")
              << "\n"
              << "beta1 = " << cfg.beta1 << "\nbeta2 = " << cfg.beta2 << "\n"
              << "adam_eps = " << cfg.adam_eps << "\n"
              << "clip_norm = " << cfg.clip_norm << "\n"
              << "seed = " << cfg.seed << "\n"
              << "shuffle = " << (cfg.shuffle ? "true" : "false") << "\n"
              << "threads = " << cfg.n_threads << "\n"
              << "train_fraction = " << split_fraction << "\n\n";
}

int cmd_preprocess(const std::string& manifest, const std::string& out_dir) {
    const auto entries = read_manifest(manifest);
    if (entries.empty()) throw DataError("no records in manifest " + manifest);
    fs::create_directories(out_dir);

    std::vector<ManifestEntry> written;
    int failures = 0;
    for (const auto& entry : entries) {
        try {
            const RawRecord raw = read_raw_record(entry.csv_path, entry.meta_path);
            const PreprocessedRecord pre = preprocess_record(raw);
            const std::string csv = (fs::path(out_dir) / (pre.record_id + ".csv")).string();
            const std::string meta = (fs::path(out_dir) / (pre.record_id + ".meta")).string();
            write_preprocessed_record(pre, csv, meta);
            written.push_back({pre.record_id + ".csv", pre.record_id + ".meta"});
            std::cout << pre.record_id << ": channels=" << raw.channels.size()
                      << " fs=" << raw.fs
                      << " samples_in=" << raw.channels.front().size()
                      << " samples_out=" << pre.signal.size()
                      << " label=" << label_name(pre.label) << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << entry.csv_path << ": ERROR " << e.what() << "\n";
        }
    }
    write_manifest(written, (fs::path(out_dir) / "manifest.txt").string());
    std::cout << written.size() << " of " << entries.size() << " records preprocessed\n";
    return failures == 0 ? 0 : kExitData;
}

int cmd_synth(const SynthSpec& spec, std::uint64_t seed, const std::string& out_dir) {
    validate(spec);
    fs::create_directories(out_dir);
    const auto records = synth_dataset(spec, seed);
    std::vector<ManifestEntry> entries;
    for (const auto& record : records) {
        const std::string csv = record.record_id + ".csv";
        const std::string meta = record.record_id + ".meta";
        write_raw_record(record, (fs::path(out_dir) / csv).string(),
                         (fs::path(out_dir) / meta).string());
        entries.push_back({csv, meta});
        std::cout << record.record_id << ": label=" << label_name(record.label)
                  << " samples=" << record.channels.front().size() << "\n";
    }
    write_manifest(entries, (fs::path(out_dir) / "manifest.txt").string());
    std::cout << records.size() << " records written to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& manifest, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg, double split_fraction,
              const std::string& out_dir) {
    echo_model_config(model_cfg);
    echo_train_config(train_cfg, split_fraction);
    auto result = run_experiment(manifest, model_cfg, train_cfg,
                                 SplitSpec{split_fraction}, out_dir);
    std::cout << "train_windows: " << result.train_windows.size() << "\n"
              << "test_windows: " << result.test_windows.size() << "\n"
              << "final_train_loss: " << result.training.epoch_loss.back() << "\n\n"
              << render_report_text(result.report);
    if (!out_dir.empty()) std::cout << "artifacts written to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest,
             double split_fraction, bool all_windows, bool per_record, int threads) {
    Model model = load_checkpoint(checkpoint);
    echo_model_config(model.config());

    const auto records = load_raw_records(manifest);
    std::vector<PreprocessedRecord> preprocessed;
    for (const auto& r : records) preprocessed.push_back(preprocess_record(r));

    std::vector<Window> windows;
    if (all_windows) {
        for (const auto& p : preprocessed) {
            auto w = make_windows(p);
            std::move(w.begin(), w.end(), std::back_inserter(windows));
        }
    } else {
        windows = temporal_split(preprocessed, SplitSpec{split_fraction}).test;
    }

    EvalOptions options;
    options.per_record_average = per_record;
    options.n_threads = threads;
    std::cout << render_report_text(evaluate(model, windows, options));
    return 0;
}

int cmd_params(const ModelConfig& cfg) {
    echo_model_config(cfg);
    Model model = build_model(cfg);

    const long long backbone = backbone_param_count(cfg.backbone);
    const long long encoder = cfg.encoder ? encoder_param_count(*cfg.encoder) : 0;
    const long long head = head_param_count(cfg.backbone.block_channels.back(), cfg.head);
    const long long total = model.total_param_count();

    std::cout << "backbone_params: " << backbone << "\n"
              << "encoder_params: " << encoder << "\n"
              << "head_params: " << head << "\n"
              << "total_params: " << total << "\n";
    if (backbone + encoder + head != total)
        throw NumericError("parameter accounting mismatch against the registry walk");

    std::cout << "reference_total_proposed: " << reference::kPublishedTotalProposed
              << " (delta " << total - reference::kPublishedTotalProposed << ")\n"
              << "reference_total_backbone_only: "
              << reference::kPublishedTotalBackboneOnly << " (delta "
              << total - encoder - reference::kPublishedTotalBackboneOnly << ")\n"
              << "reference_per_encoder_layer: " << reference::kPublishedPerEncoderLayer
              << " (this build: "
              << (cfg.encoder ? encoder_layer_param_count(*cfg.encoder) : 0) << ")\n"
              << "reference_encoder_contribution: "
              << reference::kPublishedEncoderContribution << " (this build: " << encoder
              << ")\n";
    return 0;
}

// One manual check kept outside grad_check so the fault hook can corrupt the
// analytic value and prove the comparison path fails loudly.
double manual_product_check(bool inject_fault) {
    auto w = Tensor::from_data({6}, {0.3, -0.7, 1.1, 0.4, -0.2, 0.9}, true);
    auto x = Tensor::from_data({6}, {1.5, 0.2, -0.8, 0.6, 1.1, -0.4});
    auto loss = ops::sum(ops::mul(w, x));
    backward(loss);
    if (inject_fault) w->grad[0] += 1.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < w->size(); ++i) {
        const double saved = w->data[i];
        const double step = 1e-5;
        w->data[i] = saved + step;
        const double up = ops::sum(ops::mul(w, x))->value();
        w->data[i] = saved - step;
        const double down = ops::sum(ops::mul(w, x))->value();
        w->data[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        worst = std::max(worst, std::abs(w->grad[i] - numeric) /
                                    std::max({std::abs(w->grad[i]), std::abs(numeric), 1e-6}));
    }
    return worst;
}

int cmd_gradcheck(const ModelConfig& cfg, std::uint64_t seed, std::size_t coords,
                  bool inject_fault) {
    echo_model_config(cfg);
    Rng rng(seed);
    bool ok = true;
    std::string worst_name = "none";
    double worst_dev = 0.0;

    auto run_check = [&](const std::string& name, double tolerance, double deviation) {
        const bool passed = deviation <= tolerance;
        ok = ok && passed;
        if (deviation > worst_dev) {
            worst_dev = deviation;
            worst_name = name;
        }
        std::cout << (passed ? "ok   " : "FAIL ") << name << ": max_rel_dev "
                  << deviation << " (tolerance " << tolerance << ")\n";
    };

    auto rand_tensor = [&](std::vector<int> shape) {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        return Tensor::from_data(std::move(shape), std::move(v), true);
    };

    {
        auto x = rand_tensor({2, 10});
        auto w = rand_tensor({3, 2, 3});
        auto b = rand_tensor({3});
        run_check("conv1d", 1e-4,
                  grad_check(
                      [](const std::vector<TensorPtr>& in) {
                          auto y = ops::conv1d(in[0], in[1], in[2], 2);
                          return ops::sum(ops::mul(y, y));
                      },
                      {x, w, b}, 1e-5)
                      .max_rel_dev);
    }
    {
        auto x = rand_tensor({4, 5});
        auto w = rand_tensor({5, 3});
        auto b = rand_tensor({3});
        run_check("dense", 1e-4,
                  grad_check(
                      [](const std::vector<TensorPtr>& in) {
                          auto y = ops::dense(in[0], in[1], in[2]);
                          return ops::sum(ops::mul(y, y));
                      },
                      {x, w, b}, 1e-5)
                      .max_rel_dev);
    }
    {
        auto x = rand_tensor({10});
        run_check("softmax_cross_entropy", 1e-4,
                  grad_check(
                      [](const std::vector<TensorPtr>& in) {
                          return ops::cross_entropy(ops::scale(ops::softmax(in[0], 0), 3.0), 4);
                      },
                      {x}, 1e-5)
                      .max_rel_dev);
    }
    {
        auto x = rand_tensor({3, 6});
        auto g = rand_tensor({6});
        auto s = rand_tensor({6});
        run_check("layer_norm", 1e-4,
                  grad_check(
                      [](const std::vector<TensorPtr>& in) {
                          auto y = ops::layer_norm(in[0], in[1], in[2]);
                          return ops::sum(ops::mul(y, y));
                      },
                      {x, g, s}, 1e-5)
                      .max_rel_dev);
    }
    run_check("product_rule", 1e-6, manual_product_check(inject_fault));

    {
        Model model = build_model(cfg);
        // Nudge every parameter off its initialization point; zero biases
        // make relu preactivations sit exactly on the kink, where central
        // differences and the subgradient legitimately disagree.
        for (const auto& entry : model.registry().entries())
            for (double& v : entry.tensor->data) v += rng.uniform(0.01, 0.06) *
                                                      (rng.uniform01() < 0.5 ? -1.0 : 1.0);
        std::vector<double> window(static_cast<std::size_t>(kWindowLength));
        for (auto& v : window) v = rng.uniform(-1.5, 1.5);
        std::vector<TensorPtr> inputs;
        std::vector<std::string> names;
        for (const auto& entry : model.registry().entries()) {
            inputs.push_back(entry.tensor);
            names.push_back(entry.name);
        }
        auto report = grad_check(
            [&](const std::vector<TensorPtr>&) {
                return ops::cross_entropy(model.forward(window), 1);
            },
            inputs, 1e-5, coords, names);
        std::cout << "end-to-end worst input: " << report.worst_input << " ("
                  << report.coords_checked << " coordinates)\n";
        run_check("model_end_to_end", 1e-3, report.max_rel_dev);
    }

    std::cout << (ok ? "all gradient checks passed" : "gradient checks FAILED")
              << "; worst " << worst_name << " at " << worst_dev << "\n";
    return ok ? 0 : kExitNumeric;
}

struct SweepCell {
    std::string label;
    ModelConfig config;
};

std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

int cmd_sweep(const std::string& manifest, int table, const ModelConfig& single_cfg,
              const TrainConfig& train_cfg, double split_fraction,
              const std::string& out_dir) {
    const auto records = load_raw_records(manifest);

    std::vector<SweepCell> cells;
    if (table == 0) {
        cells.push_back({"single", single_cfg});
    } else {
        for (const auto& cell : ablation_grid(table)) cells.push_back({cell.label, cell.config});
    }

    echo_train_config(train_cfg, split_fraction);
    std::string txt = "configuration\taccuracy_percent\tparameters\n";
    for (const auto& cell : cells) {
        std::string row = cell.label + "\t";
        try {
            if (table == 2) {
                // Split/kernel rows report the backbone-only variant and the
                // full model side by side.
                ModelConfig without = cell.config;
                without.encoder.reset();
                auto plain = run_experiment(records, without, train_cfg,
                                            SplitSpec{split_fraction}, "");
                auto full = run_experiment(records, cell.config, train_cfg,
                                           SplitSpec{split_fraction}, "");
                row += format_number(plain.report.accuracy) + "/" +
                       format_number(full.report.accuracy) + "\t" +
                       std::to_string(plain.report.param_count) + "/" +
                       std::to_string(full.report.param_count);
            } else {
                auto full = run_experiment(records, cell.config, train_cfg,
                                           SplitSpec{split_fraction}, "");
                row += format_number(full.report.accuracy) + "\t" +
                       std::to_string(full.report.param_count);
            }
        } catch (const std::exception& e) {
            row += std::string("ERROR ") + e.what() + "\t-";
        }
        txt += row + "\n";
        std::cout << row << "\n";
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(fs::path(out_dir) / ("table" + std::to_string(table) + ".tsv"));
        out << txt;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-frequency convolutional transformer for NI-fECG arrhythmia"};
    app.require_subcommand(1);

    std::string config_path, manifest, out_dir, checkpoint, split = "50";
    std::uint64_t seed = 0;
    bool seed_given = false;
    TrainConfig train_cfg;
    SynthSpec synth_spec;
    bool eval_all = false, per_record = false, inject_fault = false;
    int table = 2;
    std::size_t gradcheck_coords = 1;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Override the seed")
            ->each([&](const std::string&) { seed_given = true; });
    };

    auto* preprocess = app.add_subcommand("preprocess", "Run the preprocessing chain");
    preprocess->add_option("--manifest", manifest, "Raw record manifest")->required();
    preprocess->add_option("--out", out_dir, "Output directory")->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--out", out_dir, "Output directory")->required();
    synth->add_option("--records", synth_spec.n_records, "Record count");
    synth->add_option("--duration", synth_spec.duration_s, "Record length in seconds");
    synth->add_option("--fs", synth_spec.fs, "Sampling rate");
    synth->add_option("--noise", synth_spec.noise_std, "White-noise level");
    synth->add_option("--jitter", synth_spec.arrhythmia_rr_jitter, "Arrhythmia RR jitter");
    synth->add_option("--maternal-rate", synth_spec.maternal_rate_hz, "Maternal rate Hz");
    synth->add_option("--fetal-rate", synth_spec.fetal_rate_hz, "Fetal rate Hz");
    add_seed(synth);

    auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest");
    train_cmd->add_option("--manifest", manifest, "Raw record manifest")->required();
    train_cmd->add_option("--config", config_path, "Model config file");
    train_cmd->add_option("--out", out_dir, "Artifact directory")->required();
    train_cmd->add_option("--split", split, "50, 85 or a fraction");
    train_cmd->add_option("--epochs", train_cfg.epochs, "Training epochs");
    train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate");
    train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size");
    train_cmd->add_option("--threads", train_cfg.n_threads, "Batch evaluation threads");
    add_seed(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    eval_cmd->add_option("--manifest", manifest, "Raw record manifest")->required();
    eval_cmd->add_option("--split", split, "50, 85 or a fraction");
    eval_cmd->add_flag("--all", eval_all, "Evaluate every window, not the test side");
    eval_cmd->add_flag("--per-record", per_record, "Average per-record accuracies");
    eval_cmd->add_option("--threads", train_cfg.n_threads, "Evaluation threads");

    auto* params_cmd = app.add_subcommand("params", "Report parameter counts");
    params_cmd->add_option("--config", config_path, "Model config file");
    add_seed(params_cmd);

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gradcheck->add_option("--config", config_path, "Model config file");
    gradcheck->add_option("--coords", gradcheck_coords,
                          "Coordinates checked per parameter tensor");
    add_seed(gradcheck);
    gradcheck->add_flag("--inject-gradient-fault", inject_fault, "Testing hook")
        ->group("");

    auto* sweep = app.add_subcommand("sweep", "Run an ablation grid");
    sweep->add_option("--manifest", manifest, "Raw record manifest")->required();
    sweep->add_option("--table", table,
                      "Grid: 2 (splits/kernels), 3 (encoders/heads), 0 (one cell)");
    sweep->add_option("--config", config_path, "Model config for --table 0");
    sweep->add_option("--out", out_dir, "Table output directory");
    sweep->add_option("--split", split, "50, 85 or a fraction");
    sweep->add_option("--epochs", train_cfg.epochs, "Training epochs per cell");
    sweep->add_option("--lr", train_cfg.learning_rate, "Learning rate");
    sweep->add_option("--batch", train_cfg.batch_size, "Batch size");
    sweep->add_option("--threads", train_cfg.n_threads, "Batch evaluation threads");
    add_seed(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*preprocess) return cmd_preprocess(manifest, out_dir);
        if (*synth) return cmd_synth(synth_spec, seed_given ? seed : 42, out_dir);
        if (*train_cmd) {
            if (seed_given) train_cfg.seed = seed;
            const ModelConfig cfg = resolve_model_config(config_path, seed, seed_given);
            return cmd_train(manifest, cfg, train_cfg, parse_split(split), out_dir);
        }
        if (*eval_cmd)
            return cmd_eval(checkpoint, manifest, parse_split(split), eval_all, per_record,
                            train_cfg.n_threads);
        if (*params_cmd)
            return cmd_params(resolve_model_config(config_path, seed, seed_given));
        if (*gradcheck)
            return cmd_gradcheck(resolve_model_config(config_path, seed, seed_given),
                                 seed_given ? seed : 7, gradcheck_coords, inject_fault);
        if (*sweep) {
            if (seed_given) train_cfg.seed = seed;
            return cmd_sweep(manifest, table,
                             resolve_model_config(config_path, seed, seed_given), train_cfg,
                             parse_split(split), out_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
