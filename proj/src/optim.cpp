#include "flowids/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "flowids/errors.hpp"

namespace flowids {

namespace {

constexpr double kProbClamp = 1e-12;

// Per-class carve-out of the validation set: every class contributes
// max(1, round(n_c * fraction)) rows, chosen by a seeded shuffle of the
// class's rows in content-canonical order.
void carve_validation(const FlowTable& table, double fraction, Rng& rng,
                      std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
    std::map<std::string, std::vector<std::size_t>> classes;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        classes[table.labels[r]].push_back(r);
    }
    for (auto& [label, indices] : classes) {
        if (indices.size() < 2) {
            throw DataError("train: class '" + label +
                            "' needs at least 2 rows for the validation carve-out");
        }
        std::sort(indices.begin(), indices.end(), [&table](std::size_t a, std::size_t b) {
            const auto ra = table.row(a);
            const auto rb = table.row(b);
            return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
        });
        shuffle(indices, rng);
        auto val_count = static_cast<std::size_t>(
            std::floor(static_cast<double>(indices.size()) * fraction + 0.5));
        val_count = std::max<std::size_t>(1, std::min(val_count, indices.size() - 1));
        for (std::size_t i = 0; i < indices.size(); ++i) {
            (i < val_count ? val_idx : train_idx).push_back(indices[i]);
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("train: validation_fraction must be in (0, 1)");
    }
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("train: Adam betas must be in (0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("train: Adam epsilon must be > 0");
    if (!(positive_class_weight > 0.0)) {
        throw ConfigError("train: positive_class_weight must be > 0");
    }
}

AdamState AdamState::for_model(const HybridModel& model) {
    AdamState state;
    for (const Tensor* p : model.parameters()) {
        state.first_moment.emplace_back(p->shape());
        state.second_moment.emplace_back(p->shape());
    }
    return state;
}

BceResult bce_loss(std::span<const double> p, std::span<const int> y, double positive_weight) {
    if (p.size() != y.size()) {
        throw DimensionError("bce: probability and label counts differ");
    }
    if (p.empty()) {
        throw ParameterError("bce: empty batch");
    }
    const auto n = static_cast<double>(p.size());
    BceResult result;
    result.dloss_dlogit.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (y[i] != 0 && y[i] != 1) {
            throw ParameterError("bce: label " + std::to_string(y[i]) + " is not 0/1");
        }
        const double clamped = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
        if (y[i] == 1) {
            result.loss -= positive_weight * std::log(clamped);
            result.dloss_dlogit[i] = positive_weight * (p[i] - 1.0) / n;
        } else {
            result.loss -= std::log(1.0 - clamped);
            result.dloss_dlogit[i] = p[i] / n;
        }
    }
    result.loss /= n;
    return result;
}

void adam_step(std::vector<Tensor*> params, const GradientSet& grads, AdamState& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.tensors.size() || params.size() != state.first_moment.size()) {
        throw DimensionError("adam: parameter/gradient/state counts differ");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = *params[i];
        const Tensor& g = grads.tensors[i];
        if (!theta.same_shape(g)) {
            throw DimensionError("adam: gradient shape mismatch at parameter " +
                                 std::to_string(i));
        }
        double* m = state.first_moment[i].data();
        double* v = state.second_moment[i].data();
        double* t = theta.data();
        const double* dg = g.data();
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * dg[j];
            v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * dg[j] * dg[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            t[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
        }
    }
}

TrainRun train(HybridModel& model, const FlowTable& table, const TrainConfig& cfg,
               const FlowTable* external_validation) {
    cfg.validate();
    if (table.feature_count() != model.config().input_features) {
        throw DataError("train: table has " + std::to_string(table.feature_count()) +
                        " features, model expects " +
                        std::to_string(model.config().input_features));
    }
    const std::vector<int> all_labels = table.binary_labels();
    const auto positives = static_cast<std::size_t>(
        std::count(all_labels.begin(), all_labels.end(), 1));
    if (positives == 0 || positives == all_labels.size()) {
        throw DataError("train: training data has an empty class");
    }

    // Independent deterministic streams, always drawn in this order.
    Rng master(cfg.shuffle_seed);
    Rng carve_rng = master.split();
    Rng dropout_rng = master.split();
    Rng shuffle_rng = master.split();

    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
    FlowTable val_table;
    if (external_validation != nullptr) {
        for (std::size_t r = 0; r < table.row_count(); ++r) train_idx.push_back(r);
        val_table = *external_validation;
    } else {
        carve_validation(table, cfg.validation_fraction, carve_rng, train_idx, val_idx);
        val_table = table.select_rows(val_idx);
    }
    FlowTable train_table = table.select_rows(train_idx);
    const std::vector<int> train_labels = train_table.binary_labels();
    const std::vector<int> val_labels = val_table.binary_labels();

    AdamState adam = AdamState::for_model(model);
    std::vector<Tensor*> params = model.parameters();

    TrainRun run;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params;
    int wait = 0;

    std::vector<std::size_t> order(train_table.row_count());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(order, shuffle_rng);

        double epoch_loss_sum = 0.0;
        std::size_t seen = 0;
        const std::size_t n_train = order.size();
        int batch_index = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size, ++batch_index) {
            const std::size_t stop = std::min(n_train, start + cfg.batch_size);
            const std::size_t batch_n = stop - start;

            std::vector<ForwardBundle> bundles;
            bundles.reserve(batch_n);
            std::vector<double> probs(batch_n);
            std::vector<int> ys(batch_n);
            for (std::size_t i = 0; i < batch_n; ++i) {
                const std::size_t row = order[start + i];
                bundles.push_back(model.forward(train_table.row(row), Mode::Train,
                                                &dropout_rng));
                probs[i] = bundles.back().probability;
                ys[i] = train_labels[row];
            }
            BceResult bce = bce_loss(probs, ys, cfg.positive_class_weight);
            if (!std::isfinite(bce.loss)) {
                throw DivergenceError("train: non-finite loss at epoch " +
                                          std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_index),
                                      epoch, batch_index);
            }
            GradientSet grads = model.backward(bundles[0], bce.dloss_dlogit[0]);
            for (std::size_t i = 1; i < batch_n; ++i) {
                grads.add_in_place(model.backward(bundles[i], bce.dloss_dlogit[i]));
            }
            adam_step(params, grads, adam, cfg);

            epoch_loss_sum += bce.loss * static_cast<double>(batch_n);
            seen += batch_n;
        }

        // Validation pass in inference mode (dropout inert).
        std::vector<double> val_probs(val_table.row_count());
        std::vector<int> val_preds(val_table.row_count());
        for (std::size_t r = 0; r < val_table.row_count(); ++r) {
            val_probs[r] = model.forward(val_table.row(r), Mode::Infer).probability;
            val_preds[r] = val_probs[r] >= 0.5 ? 1 : 0;
        }
        const double val_loss = bce_loss(val_probs, val_labels).loss;
        MetricSet val_metrics = metrics(confusion(val_preds, val_labels));
        val_metrics.loss = val_loss;

        run.history.push_back({epoch_loss_sum / static_cast<double>(seen), val_loss,
                               val_metrics});
        run.stopped_epoch = epoch;

        if (val_loss < best_val_loss) {
            best_val_loss = val_loss;
            run.best_epoch = epoch;
            wait = 0;
            best_params.clear();
            for (const Tensor* p : params) best_params.push_back(*p);
        } else {
            ++wait;
            if (wait >= cfg.patience) break;
        }
    }

    run.best_val_loss = best_val_loss;
    if (cfg.restore_best && !best_params.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
    }
    return run;
}

}  // namespace flowids
