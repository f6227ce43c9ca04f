#include "flowids/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowids/data.hpp"
#include "flowids/errors.hpp"
#include "flowids/eval.hpp"
#include "flowids/gradcheck.hpp"
#include "flowids/model.hpp"
#include "flowids/optim.hpp"

namespace flowids {

namespace {

using nlohmann::ordered_json;

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// Options shared by the dataset-consuming commands.
struct DatasetOptions {
    std::string data_path;
    std::string label_column = "label";
    std::vector<std::string> drop_columns;
    std::string normal_label = "NORMAL";
};

struct ArchOptions {
    std::size_t conv_blocks = 3;
    std::size_t filters = 64;
    std::size_t kernel_size = 3;
    std::size_t pool = 2;
    std::vector<std::size_t> lstm_units = {64, 128};
    std::size_t dense_units = 128;
    double dropout = 0.4;

    ArchitectureConfig to_config(std::size_t input_features) const {
        ArchitectureConfig cfg;
        cfg.input_features = input_features;
        cfg.conv_blocks.assign(conv_blocks, ConvSpec{filters, kernel_size});
        cfg.pool = pool;
        cfg.lstm_units = lstm_units;
        cfg.dense_units = dense_units;
        cfg.dropout_rate = dropout;
        return cfg;
    }
};

void add_dataset_options(CLI::App* cmd, DatasetOptions& opts) {
    cmd->add_option("--data", opts.data_path, "Input CSV of flow statistics")->required();
    cmd->add_option("--label-column", opts.label_column, "Name of the label column");
    cmd->add_option("--drop", opts.drop_columns,
                    "Columns to drop before encoding (identifier leaks)")
        ->delimiter(',');
    cmd->add_option("--normal-label", opts.normal_label,
                    "Label value mapped to class 0 (case-insensitive)");
}

void add_arch_options(CLI::App* cmd, ArchOptions& opts) {
    cmd->add_option("--conv-blocks", opts.conv_blocks, "Number of conv+pool blocks");
    cmd->add_option("--filters", opts.filters, "Filters per conv block");
    cmd->add_option("--kernel-size", opts.kernel_size, "Conv kernel size");
    cmd->add_option("--pool", opts.pool, "Max-pool extent");
    cmd->add_option("--lstm-units", opts.lstm_units, "LSTM layer sizes, bottom first")
        ->delimiter(',');
    cmd->add_option("--dense-units", opts.dense_units, "Hidden dense layer size");
    cmd->add_option("--dropout", opts.dropout, "Dropout rate in [0, 1)")
        ->check(CLI::Range(0.0, 0.999999));
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
    cmd->add_option("--epochs", cfg.max_epochs, "Maximum training epochs");
    cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
    cmd->add_option("--patience", cfg.patience, "Early-stopping patience (epochs)");
    cmd->add_option("--val-fraction", cfg.validation_fraction,
                    "Stratified validation carve-out from the training split");
    cmd->add_option("--pos-weight", cfg.positive_class_weight,
                    "Optional weight on positive-class loss terms");
    cmd->add_flag("--no-restore-best{false}", cfg.restore_best,
                  "Keep final-epoch weights instead of the best-epoch ones");
}

FlowTable load_pipeline_table(const DatasetOptions& opts) {
    FlowTable table = load_csv(opts.data_path, opts.label_column, opts.drop_columns);
    table = clean(table);
    table = binarize_labels(table, opts.normal_label);
    return table;
}

// Selects and reorders columns to a stored schema; DataError when a needed
// column is missing.
FlowTable align_features(const FlowTable& table, const std::vector<std::string>& names) {
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        bool found = false;
        for (std::size_t c = 0; c < table.feature_count(); ++c) {
            if (table.feature_names[c] == name) {
                cols.push_back(c);
                found = true;
                break;
            }
        }
        if (!found) {
            throw DataError("schema: input is missing feature column '" + name + "'");
        }
    }
    FlowTable out;
    out.feature_names = names;
    out.labels = table.labels;
    out.provenance = table.provenance;
    out.values.reserve(table.row_count() * names.size());
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t c : cols) out.values.push_back(table.at(r, c));
    }
    out.provenance.log.push_back("align: selected " + std::to_string(names.size()) +
                                 " model feature columns");
    return out;
}

FlowTable drop_nonfinite_rows(const FlowTable& table) {
    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        const auto row = table.row(r);
        bool finite = true;
        for (double v : row) {
            if (!std::isfinite(v)) {
                finite = false;
                break;
            }
        }
        if (finite) kept.push_back(r);
    }
    if (kept.empty()) {
        throw DataError("evaluate: every row contains a non-finite cell");
    }
    if (kept.size() == table.row_count()) return table;
    FlowTable out = table.select_rows(kept);
    out.provenance.log.push_back("align: dropped " +
                                 std::to_string(table.row_count() - kept.size()) +
                                 " rows with non-finite cells");
    return out;
}

ordered_json dataset_json(const FlowTable& table) {
    ordered_json j = table.provenance.to_json();
    j["rows"] = table.row_count();
    j["features"] = table.feature_count();
    return j;
}

// --- preprocess ------------------------------------------------------------

struct PreprocessArgs {
    DatasetOptions dataset;
    std::string out_path;
    std::string sidecar_path;
};

int cmd_preprocess(const PreprocessArgs& args) {
    FlowTable table = load_pipeline_table(args.dataset);
    const NormalizationSpec spec = minmax_fit(table, FitScope::WholeDataset);
    table = minmax_apply(spec, table);
    write_csv(table, args.out_path);
    const std::string sidecar =
        args.sidecar_path.empty() ? args.out_path + ".json" : args.sidecar_path;
    write_sidecar(table, spec, sidecar);
    std::cout << "preprocess: wrote " << table.row_count() << " rows to " << args.out_path
              << " (sidecar " << sidecar << ")\n";
    return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    DatasetOptions dataset;
    ArchOptions arch;
    TrainConfig train_cfg;
    std::string model_path = "model.clstm";
    std::string report_path = "train_report.json";
    std::uint64_t seed = 42;
    double split_ratio = 0.7;
    std::string fit_scope = "train_only";
    bool monitor_test = false;
};

int cmd_train(const TrainArgs& args) {
    Stopwatch watch;
    FlowTable table = load_pipeline_table(args.dataset);

    const SplitPlan plan = stratified_split(table, args.split_ratio, args.seed);
    FlowTable train_table = table.select_rows(plan.train_indices);
    FlowTable test_table = table.select_rows(plan.test_indices);

    const FitScope scope =
        args.fit_scope == "whole_dataset" ? FitScope::WholeDataset : FitScope::TrainOnly;
    const NormalizationSpec spec =
        minmax_fit(scope == FitScope::WholeDataset ? table : train_table, scope);
    train_table = minmax_apply(spec, train_table);
    test_table = minmax_apply(spec, test_table);

    const ArchitectureConfig arch = args.arch.to_config(table.feature_count());
    HybridModel model(arch, args.seed);
    TrainConfig train_cfg = args.train_cfg;
    train_cfg.shuffle_seed = args.seed;

    TrainRun run = train(model, train_table, train_cfg,
                         args.monitor_test ? &test_table : nullptr);
    EvalResult test_eval = evaluate(model, test_table);

    model.metadata = ordered_json{{"pipeline",
                                   {{"label_column", args.dataset.label_column},
                                    {"normal_label", args.dataset.normal_label},
                                    {"drop_columns", args.dataset.drop_columns},
                                    {"fit_scope", args.fit_scope},
                                    {"feature_names", train_table.feature_names},
                                    {"normalization", spec.to_json()}}}};
    save_model(model, args.model_path);

    ordered_json report;
    report["command"] = "train";
    report["seed"] = args.seed;
    report["dataset"] = dataset_json(table);
    report["split"] = {{"ratio", args.split_ratio},
                       {"train_rows", plan.train_indices.size()},
                       {"test_rows", plan.test_indices.size()},
                       {"monitor_test", args.monitor_test}};
    report["config"] = {{"architecture", architecture_to_json(arch)},
                        {"training", train_config_to_json(train_cfg)}};
    report["results"] = {{"test_confusion", confusion_to_json(test_eval.cm)},
                         {"test_metrics", metrics_to_json(test_eval.metric_set)},
                         {"train_run", train_run_to_json(run)}};
    report["model_file"] = args.model_path;
    report["duration_seconds"] = watch.seconds();
    write_report(report, args.report_path);

    std::cout << std::fixed << std::setprecision(2) << "train: " << run.stopped_epoch
              << " epochs (best " << run.best_epoch << "), test accuracy "
              << test_eval.metric_set.accuracy << "%, model " << args.model_path << "\n";
    return 0;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    std::string model_path;
    std::string data_path;
    std::string report_path = "eval_report.json";
    double threshold = 0.5;
    std::string label_column;  // empty: use the value stored in the model
};

FlowTable load_for_model(const HybridModel& model, const std::string& data_path,
                         const std::string& label_column_override, bool need_labels) {
    const auto& pipeline = model.metadata.at("pipeline");
    const std::string label_column = !label_column_override.empty()
                                         ? label_column_override
                                         : (need_labels ? pipeline.at("label_column")
                                                              .get<std::string>()
                                                        : std::string(""));
    const auto drop = pipeline.at("drop_columns").get<std::vector<std::string>>();

    FlowTable table = load_csv(data_path, label_column, drop);
    if (need_labels) {
        table = binarize_labels(table, pipeline.at("normal_label").get<std::string>());
    }
    table = align_features(table, pipeline.at("feature_names").get<std::vector<std::string>>());
    table = drop_nonfinite_rows(table);
    const NormalizationSpec spec = NormalizationSpec::from_json(pipeline.at("normalization"));
    return minmax_apply(spec, table);
}

int cmd_evaluate(const EvaluateArgs& args) {
    Stopwatch watch;
    HybridModel model = load_model(args.model_path);
    FlowTable table = load_for_model(model, args.data_path, args.label_column, true);
    EvalResult result = evaluate(model, table, args.threshold);

    ordered_json report;
    report["command"] = "evaluate";
    report["model_file"] = args.model_path;
    report["seed"] = model.init_seed();
    report["threshold"] = args.threshold;
    report["dataset"] = dataset_json(table);
    report["config"] = {{"architecture", architecture_to_json(model.config())}};
    report["results"] = {{"confusion", confusion_to_json(result.cm)},
                         {"metrics", metrics_to_json(result.metric_set)}};
    report["duration_seconds"] = watch.seconds();
    write_report(report, args.report_path);

    std::cout << std::fixed << std::setprecision(2) << "evaluate: accuracy "
              << result.metric_set.accuracy << "%, precision " << result.metric_set.precision
              << "%, recall " << result.metric_set.recall << "%, f1 "
              << result.metric_set.f1 << "%\n";
    return 0;
}

// --- predict -----------------------------------------------------------------

struct PredictArgs {
    std::string model_path;
    std::string data_path;
    std::string out_path = "predictions.csv";
    double threshold = 0.5;
    std::string label_column;  // optional column to ignore in the input
};

int cmd_predict(const PredictArgs& args) {
    HybridModel model = load_model(args.model_path);
    FlowTable table = load_for_model(model, args.data_path, args.label_column, false);

    std::ofstream out(args.out_path, std::ios::trunc);
    if (!out) {
        throw DataError("predict: cannot open '" + args.out_path + "' for writing");
    }
    out << "row,probability,predicted_label\n";
    out.precision(17);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        const double p = model.forward(table.row(r), Mode::Infer).probability;
        out << r << ',' << p << ',' << (p >= args.threshold ? 1 : 0) << '\n';
    }
    std::cout << "predict: wrote " << table.row_count() << " probabilities to "
              << args.out_path << "\n";
    return 0;
}

// --- crossval ----------------------------------------------------------------

struct CrossvalArgs {
    DatasetOptions dataset;
    ArchOptions arch;
    TrainConfig train_cfg;
    std::string report_path = "crossval_report.json";
    std::uint64_t seed = 42;
    std::size_t k = 5;
};

int cmd_crossval(const CrossvalArgs& args) {
    Stopwatch watch;
    FlowTable table = load_pipeline_table(args.dataset);
    const ArchitectureConfig arch = args.arch.to_config(table.feature_count());
    TrainConfig train_cfg = args.train_cfg;
    train_cfg.shuffle_seed = args.seed;

    CvResult cv = crossval(table, arch, train_cfg, args.k, args.seed);

    ordered_json report;
    report["command"] = "crossval";
    report["seed"] = args.seed;
    report["k"] = args.k;
    report["dataset"] = dataset_json(table);
    report["config"] = {{"architecture", architecture_to_json(arch)},
                        {"training", train_config_to_json(train_cfg)}};
    report["results"] = cv_result_to_json(cv);
    report["duration_seconds"] = watch.seconds();
    write_report(report, args.report_path);

    std::cout << std::fixed << std::setprecision(2) << "crossval: " << args.k
              << " folds, mean accuracy " << cv.means.accuracy << "%, mean loss "
              << std::setprecision(4) << cv.means.loss << "\n";
    return 0;
}

// --- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
    int seeds = 50;
    double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& args) {
    const auto reports = run_gradcheck(args.seeds, args.tolerance);
    std::printf("%-12s %8s %14s %6s\n", "layer", "configs", "max rel err", "status");
    for (const auto& r : reports) {
        std::printf("%-12s %8d %14.3e %6s\n", r.layer.c_str(), r.configs, r.max_rel_error,
                    r.pass ? "PASS" : "FAIL");
    }
    if (!all_passed(reports)) {
        std::cerr << "gradcheck: analytic gradients disagree with finite differences\n";
        return 3;
    }
    return 0;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
    std::string out_path = "synthetic.csv";
    std::size_t n_normal = 666;
    std::size_t n_attack = 6660;
    std::size_t features = 60;
    double separation = 2.0;
    std::uint64_t seed = 42;
};

int cmd_synth(const SynthArgs& args) {
    FlowTable table = generate_synthetic(args.n_normal, args.n_attack, args.features,
                                         args.separation, args.seed);
    write_csv(table, args.out_path);
    std::cout << "synth: wrote " << table.row_count() << " rows (" << args.n_normal
              << " normal, " << args.n_attack << " attack) to " << args.out_path << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Hybrid CNN-LSTM intrusion-detection classifier for SCADA flow statistics"};
    app.require_subcommand(1);
    // One config flag for every subcommand: keys live under a [subcommand]
    // section, command-line flags win over file values.
    app.set_config("--config");
    app.fallthrough();

    PreprocessArgs pre;
    auto* pre_cmd = app.add_subcommand("preprocess",
                                       "Clean, encode, binarize and normalize a CSV");
    add_dataset_options(pre_cmd, pre.dataset);
    pre_cmd->add_option("--out", pre.out_path, "Output CSV path")->required();
    pre_cmd->add_option("--sidecar", pre.sidecar_path,
                        "Provenance sidecar path (default: <out>.json)");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train on a 70:30 stratified split");
    add_dataset_options(train_cmd, tr.dataset);
    add_arch_options(train_cmd, tr.arch);
    add_train_options(train_cmd, tr.train_cfg);
    train_cmd->add_option("--model", tr.model_path, "Output model file");
    train_cmd->add_option("--out", tr.report_path, "Output JSON report");
    train_cmd->add_option("--seed", tr.seed, "Seed for init, split and shuffling");
    train_cmd->add_option("--split-ratio", tr.split_ratio, "Training fraction");
    train_cmd->add_option("--fit-scope", tr.fit_scope,
                          "Normalization fit scope: train_only or whole_dataset")
        ->check(CLI::IsMember({"train_only", "whole_dataset"}));
    train_cmd->add_flag("--monitor-test", tr.monitor_test,
                        "Monitor the test split for early stopping instead of a carve-out");

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a saved model on labeled data");
    eval_cmd->add_option("--model", ev.model_path, "Model file")->required();
    eval_cmd->add_option("--data", ev.data_path, "Labeled CSV")->required();
    eval_cmd->add_option("--out", ev.report_path, "Output JSON report");
    eval_cmd->add_option("--threshold", ev.threshold, "Decision threshold");
    eval_cmd->add_option("--label-column", ev.label_column,
                         "Override the label column stored in the model");

    PredictArgs pd;
    auto* predict_cmd =
        app.add_subcommand("predict", "Per-row probabilities for an unlabeled CSV");
    predict_cmd->add_option("--model", pd.model_path, "Model file")->required();
    predict_cmd->add_option("--data", pd.data_path, "Unlabeled CSV")->required();
    predict_cmd->add_option("--out", pd.out_path, "Output probabilities CSV");
    predict_cmd->add_option("--threshold", pd.threshold, "Decision threshold");
    predict_cmd->add_option("--label-column", pd.label_column,
                            "Label column to ignore if the input has one");

    CrossvalArgs cv;
    auto* cv_cmd = app.add_subcommand("crossval", "Stratified k-fold cross-validation");
    add_dataset_options(cv_cmd, cv.dataset);
    add_arch_options(cv_cmd, cv.arch);
    add_train_options(cv_cmd, cv.train_cfg);
    cv_cmd->add_option("--out", cv.report_path, "Output JSON report");
    cv_cmd->add_option("--seed", cv.seed, "Seed for folds, init and shuffling");
    cv_cmd->add_option("--k", cv.k, "Number of folds")->check(CLI::Range(2, 1000));

    GradcheckArgs gc;
    auto* gc_cmd = app.add_subcommand(
        "gradcheck", "Analytic vs finite-difference gradients for every layer kind");
    gc_cmd->add_option("--seeds", gc.seeds, "Random configurations per layer kind");
    gc_cmd->add_option("--tolerance", gc.tolerance, "Max allowed relative error");

    SynthArgs sy;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
    synth_cmd->add_option("--out", sy.out_path, "Output CSV path");
    synth_cmd->add_option("--normal", sy.n_normal, "Normal (class 0) row count");
    synth_cmd->add_option("--attack", sy.n_attack, "Attack (class 1) row count");
    synth_cmd->add_option("--features", sy.features, "Feature count (>= 8)");
    synth_cmd->add_option("--separation", sy.separation, "Class shift after normalization");
    synth_cmd->add_option("--seed", sy.seed, "Generator seed");

    try {
        app.parse(argc, argv);
        if (pre_cmd->parsed()) return cmd_preprocess(pre);
        if (train_cmd->parsed()) return cmd_train(tr);
        if (eval_cmd->parsed()) return cmd_evaluate(ev);
        if (predict_cmd->parsed()) return cmd_predict(pd);
        if (cv_cmd->parsed()) return cmd_crossval(cv);
        if (gc_cmd->parsed()) return cmd_gradcheck(gc);
        if (synth_cmd->parsed()) return cmd_synth(sy);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        // DataError, model-load errors, I/O failures.
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace flowids
