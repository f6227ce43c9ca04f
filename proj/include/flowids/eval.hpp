#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowids/metrics.hpp"
#include "flowids/optim.hpp"

namespace flowids {

struct EvalResult {
    ConfusionMatrix cm;
    MetricSet metric_set;  // loss holds the mean BCE over the table
};

// Inference-mode forward per row; the table must already be normalized with
// the training NormalizationSpec.
EvalResult evaluate(const HybridModel& model, const FlowTable& test_table,
                    double threshold = 0.5);

struct CvResult {
    std::vector<MetricSet> folds;
    MetricSet means;  // unweighted averages over folds
};

// Five-fold protocol (k configurable): per fold, refit normalization on the
// k-1 training folds, train a fresh model seeded seed+fold_index, evaluate
// the held-out fold. Serial and deterministic.
CvResult crossval(const FlowTable& table, const ArchitectureConfig& arch,
                  const TrainConfig& train_cfg, std::size_t k, std::uint64_t seed);

// Report pieces shared by the CLI commands; metric values are stored to
// 4 decimal places.
nlohmann::ordered_json metrics_to_json(const MetricSet& m);
nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm);
nlohmann::ordered_json train_run_to_json(const TrainRun& run);
nlohmann::ordered_json cv_result_to_json(const CvResult& cv);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

void write_report(const nlohmann::ordered_json& report, const std::string& path);

}  // namespace flowids
