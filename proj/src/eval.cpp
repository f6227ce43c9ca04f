#include "flowids/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flowids/errors.hpp"

namespace flowids {

namespace {

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

}  // namespace

EvalResult evaluate(const HybridModel& model, const FlowTable& test_table, double threshold) {
    if (test_table.feature_count() != model.config().input_features) {
        throw DataError("evaluate: table has " + std::to_string(test_table.feature_count()) +
                        " features, model expects " +
                        std::to_string(model.config().input_features));
    }
    const std::vector<int> truth = test_table.binary_labels();
    std::vector<double> probs(test_table.row_count());
    std::vector<int> preds(test_table.row_count());
    for (std::size_t r = 0; r < test_table.row_count(); ++r) {
        probs[r] = model.forward(test_table.row(r), Mode::Infer).probability;
        preds[r] = probs[r] >= threshold ? 1 : 0;
    }
    EvalResult result;
    result.cm = confusion(preds, truth);
    result.metric_set = metrics(result.cm);
    result.metric_set.loss = bce_loss(probs, truth).loss;
    return result;
}

CvResult crossval(const FlowTable& table, const ArchitectureConfig& arch,
                  const TrainConfig& train_cfg, std::size_t k, std::uint64_t seed) {
    const FoldPlan plan = stratified_kfold(table, k, seed);

    CvResult result;
    for (std::size_t fold = 0; fold < k; ++fold) {
        std::vector<char> held(table.row_count(), 0);
        for (std::size_t r : plan.folds[fold]) held[r] = 1;
        std::vector<std::size_t> train_rows;
        train_rows.reserve(table.row_count() - plan.folds[fold].size());
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            if (!held[r]) train_rows.push_back(r);
        }

        FlowTable train_table = table.select_rows(train_rows);
        FlowTable test_table = table.select_rows(plan.folds[fold]);
        // Normalization is refit inside every fold so no statistics leak
        // from the held-out rows.
        const NormalizationSpec spec = minmax_fit(train_table, FitScope::TrainOnly);
        train_table = minmax_apply(spec, train_table);
        test_table = minmax_apply(spec, test_table);

        HybridModel model(arch, seed + fold);
        TrainConfig fold_cfg = train_cfg;
        fold_cfg.shuffle_seed = train_cfg.shuffle_seed + fold;
        train(model, train_table, fold_cfg);

        EvalResult eval_result = evaluate(model, test_table);
        result.folds.push_back(eval_result.metric_set);
    }

    for (const MetricSet& m : result.folds) {
        result.means.accuracy += m.accuracy;
        result.means.precision += m.precision;
        result.means.recall += m.recall;
        result.means.f1 += m.f1;
        result.means.loss += m.loss;
        result.means.degenerate = result.means.degenerate || m.degenerate;
    }
    const auto n = static_cast<double>(result.folds.size());
    result.means.accuracy /= n;
    result.means.precision /= n;
    result.means.recall /= n;
    result.means.f1 /= n;
    result.means.loss /= n;
    return result;
}

nlohmann::ordered_json metrics_to_json(const MetricSet& m) {
    nlohmann::ordered_json j;
    j["accuracy"] = round4(m.accuracy);
    j["precision"] = round4(m.precision);
    j["recall"] = round4(m.recall);
    j["f1"] = round4(m.f1);
    j["loss"] = round4(m.loss);
    j["degenerate"] = m.degenerate;
    return j;
}

nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm) {
    nlohmann::ordered_json j;
    j["tp"] = cm.tp;
    j["tn"] = cm.tn;
    j["fp"] = cm.fp;
    j["fn"] = cm.fn;
    return j;
}

nlohmann::ordered_json train_run_to_json(const TrainRun& run) {
    nlohmann::ordered_json j;
    j["epochs_run"] = run.stopped_epoch;
    j["best_epoch"] = run.best_epoch;
    j["best_val_loss"] = round4(run.best_val_loss);
    j["history"] = nlohmann::ordered_json::array();
    for (const EpochStats& e : run.history) {
        j["history"].push_back({{"train_loss", round4(e.train_loss)},
                                {"val_loss", round4(e.val_loss)},
                                {"val_metrics", metrics_to_json(e.val_metrics)}});
    }
    return j;
}

nlohmann::ordered_json cv_result_to_json(const CvResult& cv) {
    nlohmann::ordered_json j;
    j["folds"] = nlohmann::ordered_json::array();
    for (const MetricSet& m : cv.folds) j["folds"].push_back(metrics_to_json(m));
    j["means"] = metrics_to_json(cv.means);
    return j;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["learning_rate"] = cfg.learning_rate;
    j["max_epochs"] = cfg.max_epochs;
    j["batch_size"] = cfg.batch_size;
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["adam_epsilon"] = cfg.adam_epsilon;
    j["patience"] = cfg.patience;
    j["restore_best"] = cfg.restore_best;
    j["validation_fraction"] = cfg.validation_fraction;
    j["shuffle_seed"] = cfg.shuffle_seed;
    j["positive_class_weight"] = cfg.positive_class_weight;
    return j;
}

void write_report(const nlohmann::ordered_json& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("report: cannot open '" + path + "' for writing");
    }
    out << report.dump(2) << '\n';
    if (!out) {
        throw DataError("report: write failed for '" + path + "'");
    }
}

}  // namespace flowids
