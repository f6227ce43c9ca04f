#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowids/data.hpp"
#include "flowids/metrics.hpp"
#include "flowids/model.hpp"

namespace flowids {

struct TrainConfig {
    double learning_rate = 0.001;
    int max_epochs = 150;
    int batch_size = 16;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int patience = 10;
    bool restore_best = true;
    double validation_fraction = 0.1;
    std::uint64_t shuffle_seed = 42;
    // Optional positive-class weight for the ~10:1 attack:normal imbalance;
    // 1.0 leaves the loss unweighted.
    double positive_class_weight = 1.0;

    void validate() const;
};

// Per-parameter moment accumulators, aligned with parameter_names().
struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    long long step = 0;

    static AdamState for_model(const HybridModel& model);
};

struct BceResult {
    double loss = 0.0;
    // Gradient w.r.t. the pre-sigmoid logits: (p_i - y_i) / n.
    std::vector<double> dloss_dlogit;
};

// loss = -(1/n) sum[y ln p + (1-y) ln(1-p)], with p clamped to
// [1e-12, 1-1e-12] before the logs. An optional weight scales the positive
// terms (and their gradient) by w.
BceResult bce_loss(std::span<const double> p, std::span<const int> y,
                   double positive_weight = 1.0);

// Standard Adam with bias correction; increments state.step first.
void adam_step(std::vector<Tensor*> params, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    MetricSet val_metrics;
};

struct TrainRun {
    std::vector<EpochStats> history;
    int stopped_epoch = 0;  // 1-based index of the last epoch run
    int best_epoch = 0;     // 1-based epoch whose weights were best on validation
    double best_val_loss = 0.0;
};

// Mini-batch training per the configured protocol: a stratified validation
// carve-out (or the supplied external table), seeded per-epoch shuffles,
// one Adam step per batch (short final batch included), early stopping on
// validation loss, best-epoch weight restore. Fully deterministic for a
// fixed config.
TrainRun train(HybridModel& model, const FlowTable& table, const TrainConfig& cfg,
               const FlowTable* external_validation = nullptr);

}  // namespace flowids
