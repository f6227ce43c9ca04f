#include "flowids/metrics.hpp"

#include <string>

#include "flowids/errors.hpp"

namespace flowids {

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) {
        throw DimensionError("confusion: " + std::to_string(pred.size()) +
                             " predictions vs " + std::to_string(truth.size()) + " labels");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if ((pred[i] != 0 && pred[i] != 1) || (truth[i] != 0 && truth[i] != 1)) {
            throw ParameterError("confusion: labels must be 0 or 1");
        }
        if (pred[i] == 1) {
            truth[i] == 1 ? ++cm.tp : ++cm.fp;
        } else {
            truth[i] == 0 ? ++cm.tn : ++cm.fn;
        }
    }
    return cm;
}

MetricSet metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) {
        throw ParameterError("metrics: empty confusion matrix");
    }
    MetricSet m;
    m.accuracy = 100.0 * static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());

    if (cm.tp + cm.fp == 0) {
        m.degenerate = true;
    } else {
        m.precision = 100.0 * static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    }
    if (cm.tp + cm.fn == 0) {
        m.degenerate = true;
    } else {
        m.recall = 100.0 * static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    }
    if (m.precision + m.recall == 0.0) {
        m.degenerate = true;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

}  // namespace flowids
