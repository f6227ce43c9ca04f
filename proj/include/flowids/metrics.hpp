#pragma once

#include <cstddef>
#include <span>

namespace flowids {

// Positive class is 1 (attack).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
};

ConfusionMatrix confusion(std::span<const int> pred, std::span<const int> truth);

// Percentages in [0, 100]; zero-denominator metrics come back as 0 with the
// degenerate flag set. loss is filled in by evaluate(), not by metrics().
struct MetricSet {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double loss = 0.0;
    bool degenerate = false;
};

MetricSet metrics(const ConfusionMatrix& cm);

}  // namespace flowids
