#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowids/errors.hpp"

namespace flowids {

// Source path, applied-transform log, and categorical encodings, carried
// along so every report can state exactly how its table was produced.
struct Provenance {
    std::string source;
    std::vector<std::string> log;
    nlohmann::ordered_json encodings = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const;
};

// Labeled tabular dataset of flow records. Labels are raw strings until
// binarize_labels() maps them to "0"/"1".
struct FlowTable {
    std::vector<std::string> feature_names;
    std::vector<double> values;  // row-major, rows x features
    std::vector<std::string> labels;
    Provenance provenance;

    std::size_t row_count() const { return labels.size(); }
    std::size_t feature_count() const { return feature_names.size(); }

    double at(std::size_t row, std::size_t col) const {
        return values[row * feature_names.size() + col];
    }
    double& at(std::size_t row, std::size_t col) {
        return values[row * feature_names.size() + col];
    }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * feature_names.size(), feature_names.size()};
    }

    bool labels_binary() const;
    // Labels as 0/1 ints; DataError if binarize_labels has not run.
    std::vector<int> binary_labels() const;

    FlowTable select_rows(const std::vector<std::size_t>& indices) const;
};

// Parses a header CSV. Numeric cells pass through; a feature column with any
// non-numeric cell is label-encoded (distinct strings -> 0,1,2,... in first
// appearance order) and the encoding is recorded in provenance. The label
// column keeps its raw strings. Missing/unparseable numeric cells become NaN
// for clean() to drop.
FlowTable load_csv(const std::string& path, const std::string& label_column,
                   const std::vector<std::string>& drop_columns = {});

// Drops rows holding any non-finite cell, then constant feature columns;
// both counts are logged in provenance.
FlowTable clean(const FlowTable& table);

// normal_label (case-insensitive) -> "0", anything else -> "1"; labels that
// are already "0"/"1" are kept, so the op is idempotent. If nothing matched
// normal_label a warning is logged, not raised.
FlowTable binarize_labels(const FlowTable& table, const std::string& normal_label);

enum class FitScope { TrainOnly, WholeDataset };

struct NormalizationSpec {
    std::vector<std::string> feature_names;
    std::vector<double> mins;
    std::vector<double> maxs;
    FitScope scope = FitScope::TrainOnly;

    nlohmann::ordered_json to_json() const;
    static NormalizationSpec from_json(const nlohmann::json& j);
};

NormalizationSpec minmax_fit(const FlowTable& table, FitScope scope);

// x' = (x - min) / (max - min); constant features map to 0. Out-of-range
// values extrapolate rather than clamp.
FlowTable minmax_apply(const NormalizationSpec& spec, const FlowTable& table);

struct SplitPlan {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    double ratio = 0.7;
    std::uint64_t seed = 0;
};

// Per class: train count = round-half-up(n_c * ratio), chosen by a seeded
// shuffle of the class's rows in content-canonical order (so permuting the
// input rows cannot change which samples land on which side).
SplitPlan stratified_split(const FlowTable& table, double ratio, std::uint64_t seed);

struct FoldPlan {
    std::vector<std::vector<std::size_t>> folds;
    std::uint64_t seed = 0;
};

// Seeded shuffle per class, then round-robin assignment with a fold cursor
// that persists across classes, keeping both per-class counts and total fold
// sizes within 1 of each other.
FoldPlan stratified_kfold(const FlowTable& table, std::size_t k, std::uint64_t seed);

// Class-conditional generator: class 0 features sit in uniform bands around
// per-feature baselines; class 1 shifts a seeded subset of ceil(F/4) features
// by `separation`, which makes the classes linearly separable for
// separation >= 1. Rows are labeled NORMAL/ATTACK and shuffled.
FlowTable generate_synthetic(std::size_t n_normal, std::size_t n_attack,
                             std::size_t features, double separation, std::uint64_t seed);

void write_csv(const FlowTable& table, const std::string& path);

// JSON sidecar: provenance (drop lists, encodings, transform log) plus the
// normalization spec.
void write_sidecar(const FlowTable& table, const NormalizationSpec& spec,
                   const std::string& path);

}  // namespace flowids
