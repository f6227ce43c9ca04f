#include "flowids/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "flowids/rng.hpp"

namespace flowids {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+') ++begin;  // from_chars rejects an explicit plus
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

// Rows ordered by content so stratified selection is invariant under input
// row permutation.
std::vector<std::size_t> content_canonical_order(const FlowTable& table,
                                                 std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end(), [&table](std::size_t a, std::size_t b) {
        const auto ra = table.row(a);
        const auto rb = table.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    return indices;
}

// label value -> row indices, in sorted label order.
std::map<std::string, std::vector<std::size_t>> rows_by_class(const FlowTable& table) {
    std::map<std::string, std::vector<std::size_t>> classes;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        classes[table.labels[r]].push_back(r);
    }
    return classes;
}

}  // namespace

nlohmann::ordered_json Provenance::to_json() const {
    nlohmann::ordered_json j;
    j["source"] = source;
    j["log"] = log;
    j["encodings"] = encodings;
    return j;
}

bool FlowTable::labels_binary() const {
    return std::all_of(labels.begin(), labels.end(),
                       [](const std::string& l) { return l == "0" || l == "1"; });
}

std::vector<int> FlowTable::binary_labels() const {
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
        if (l == "0") {
            out.push_back(0);
        } else if (l == "1") {
            out.push_back(1);
        } else {
            throw DataError("table: label '" + l + "' is not binary; run binarize first");
        }
    }
    return out;
}

FlowTable FlowTable::select_rows(const std::vector<std::size_t>& indices) const {
    FlowTable out;
    out.feature_names = feature_names;
    out.provenance = provenance;
    out.values.reserve(indices.size() * feature_count());
    out.labels.reserve(indices.size());
    for (std::size_t r : indices) {
        const auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
        out.labels.push_back(labels[r]);
    }
    return out;
}

FlowTable load_csv(const std::string& path, const std::string& label_column,
                   const std::vector<std::string>& drop_columns) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("csv: cannot open '" + path + "'");
    }

    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("csv: '" + path + "' is empty");
    }
    const std::vector<std::string> header = split_line(line);

    // An empty label_column means an unlabeled file: every kept column is a
    // feature and labels come back empty.
    std::size_t label_index = header.size();
    if (!label_column.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == label_column) label_index = i;
        }
        if (label_index == header.size()) {
            throw DataError("csv: label column '" + label_column + "' not found in '" +
                            path + "'");
        }
    }

    const std::set<std::string> dropped(drop_columns.begin(), drop_columns.end());
    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i != label_index && !dropped.count(header[i])) feature_cols.push_back(i);
    }

    std::vector<std::vector<std::string>> raw_rows;
    std::size_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw DataError("csv: line " + std::to_string(line_number) + " has " +
                            std::to_string(cells.size()) + " fields, header has " +
                            std::to_string(header.size()));
        }
        raw_rows.push_back(std::move(cells));
    }
    if (raw_rows.empty()) {
        throw DataError("csv: '" + path + "' has a header but no data rows");
    }

    FlowTable table;
    table.provenance.source = path;
    for (std::size_t col : feature_cols) table.feature_names.push_back(header[col]);

    // Per column: numeric if every non-empty cell parses; otherwise encode
    // distinct strings in first-appearance order.
    const std::size_t n_rows = raw_rows.size();
    const std::size_t n_features = feature_cols.size();
    table.values.assign(n_rows * n_features, 0.0);
    for (std::size_t f = 0; f < n_features; ++f) {
        const std::size_t col = feature_cols[f];
        bool numeric = true;
        for (const auto& row : raw_rows) {
            double v;
            if (!row[col].empty() && !parse_double(row[col], v)) {
                numeric = false;
                break;
            }
        }
        if (numeric) {
            for (std::size_t r = 0; r < n_rows; ++r) {
                double v = std::numeric_limits<double>::quiet_NaN();
                if (!raw_rows[r][col].empty()) parse_double(raw_rows[r][col], v);
                table.values[r * n_features + f] = v;
            }
        } else {
            nlohmann::ordered_json encoding = nlohmann::ordered_json::object();
            std::map<std::string, double> codes;
            for (std::size_t r = 0; r < n_rows; ++r) {
                const std::string& cell = raw_rows[r][col];
                auto it = codes.find(cell);
                if (it == codes.end()) {
                    const double code = static_cast<double>(codes.size());
                    it = codes.emplace(cell, code).first;
                    encoding[cell] = code;
                }
                table.values[r * n_features + f] = it->second;
            }
            table.provenance.encodings[header[col]] = std::move(encoding);
        }
    }

    table.labels.reserve(n_rows);
    for (const auto& row : raw_rows) {
        table.labels.push_back(label_index < header.size() ? row[label_index] : "");
    }

    table.provenance.log.push_back("load_csv: " + std::to_string(n_rows) + " rows, " +
                                   std::to_string(n_features) + " feature columns, label '" +
                                   label_column + "'");
    if (!drop_columns.empty()) {
        std::string joined;
        for (const auto& d : drop_columns) {
            if (!joined.empty()) joined += ", ";
            joined += d;
        }
        table.provenance.log.push_back("load_csv: dropped columns [" + joined + "]");
    }
    return table;
}

FlowTable clean(const FlowTable& table) {
    std::vector<std::size_t> kept_rows;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        const auto row = table.row(r);
        if (std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
            kept_rows.push_back(r);
        }
    }
    if (kept_rows.empty()) {
        throw DataError("clean: every row contains a non-finite cell; nothing left");
    }
    const std::size_t dropped_rows = table.row_count() - kept_rows.size();

    std::vector<std::size_t> kept_cols;
    std::vector<std::string> dropped_cols;
    for (std::size_t c = 0; c < table.feature_count(); ++c) {
        const double first = table.at(kept_rows[0], c);
        bool constant = true;
        for (std::size_t r : kept_rows) {
            if (table.at(r, c) != first) {
                constant = false;
                break;
            }
        }
        if (constant) {
            dropped_cols.push_back(table.feature_names[c]);
        } else {
            kept_cols.push_back(c);
        }
    }

    FlowTable out;
    out.provenance = table.provenance;
    for (std::size_t c : kept_cols) out.feature_names.push_back(table.feature_names[c]);
    out.values.reserve(kept_rows.size() * kept_cols.size());
    for (std::size_t r : kept_rows) {
        for (std::size_t c : kept_cols) out.values.push_back(table.at(r, c));
        out.labels.push_back(table.labels[r]);
    }

    std::string note = "clean: dropped " + std::to_string(dropped_rows) +
                       " rows with non-finite cells and " +
                       std::to_string(dropped_cols.size()) + " constant columns";
    if (!dropped_cols.empty()) {
        note += " (";
        for (std::size_t i = 0; i < dropped_cols.size(); ++i) {
            if (i) note += ", ";
            note += dropped_cols[i];
        }
        note += ")";
    }
    out.provenance.log.push_back(note);
    return out;
}

FlowTable binarize_labels(const FlowTable& table, const std::string& normal_label) {
    FlowTable out = table;
    const std::string target = lower(normal_label);
    std::size_t matched = 0;
    bool any_non_binary = false;
    for (auto& label : out.labels) {
        if (label == "0" || label == "1") continue;
        any_non_binary = true;
        if (lower(label) == target) {
            label = "0";
            ++matched;
        } else {
            label = "1";
        }
    }
    if (any_non_binary && matched == 0) {
        out.provenance.log.push_back("binarize: warning: no row matched normal label '" +
                                     normal_label + "'");
    } else {
        out.provenance.log.push_back("binarize: normal label '" + normal_label + "' -> 0, " +
                                     std::to_string(matched) + " rows matched");
    }
    return out;
}

nlohmann::ordered_json NormalizationSpec::to_json() const {
    nlohmann::ordered_json j;
    j["scope"] = scope == FitScope::TrainOnly ? "train_only" : "whole_dataset";
    j["features"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < feature_names.size(); ++i) {
        j["features"].push_back(
            {{"name", feature_names[i]}, {"min", mins[i]}, {"max", maxs[i]}});
    }
    return j;
}

NormalizationSpec NormalizationSpec::from_json(const nlohmann::json& j) {
    NormalizationSpec spec;
    spec.scope = j.at("scope").get<std::string>() == "whole_dataset" ? FitScope::WholeDataset
                                                                     : FitScope::TrainOnly;
    for (const auto& f : j.at("features")) {
        spec.feature_names.push_back(f.at("name").get<std::string>());
        spec.mins.push_back(f.at("min").get<double>());
        spec.maxs.push_back(f.at("max").get<double>());
    }
    return spec;
}

NormalizationSpec minmax_fit(const FlowTable& table, FitScope scope) {
    if (table.row_count() == 0) {
        throw DataError("minmax: cannot fit on an empty table");
    }
    NormalizationSpec spec;
    spec.scope = scope;
    spec.feature_names = table.feature_names;
    spec.mins.resize(table.feature_count());
    spec.maxs.resize(table.feature_count());
    for (std::size_t c = 0; c < table.feature_count(); ++c) {
        double lo = table.at(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < table.row_count(); ++r) {
            lo = std::min(lo, table.at(r, c));
            hi = std::max(hi, table.at(r, c));
        }
        spec.mins[c] = lo;
        spec.maxs[c] = hi;
    }
    return spec;
}

FlowTable minmax_apply(const NormalizationSpec& spec, const FlowTable& table) {
    if (spec.feature_names != table.feature_names) {
        throw DataError("minmax: spec feature names do not match the table schema");
    }
    FlowTable out = table;
    for (std::size_t c = 0; c < table.feature_count(); ++c) {
        const double range = spec.maxs[c] - spec.mins[c];
        for (std::size_t r = 0; r < table.row_count(); ++r) {
            out.at(r, c) = range == 0.0 ? 0.0 : (table.at(r, c) - spec.mins[c]) / range;
        }
    }
    out.provenance.log.push_back("minmax_apply: normalized " +
                                 std::to_string(table.feature_count()) + " features");
    return out;
}

SplitPlan stratified_split(const FlowTable& table, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ParameterError("split: ratio must be in (0, 1)");
    }
    SplitPlan plan;
    plan.ratio = ratio;
    plan.seed = seed;

    Rng rng(seed);
    for (auto& [label, indices] : rows_by_class(table)) {
        if (indices.size() < 2) {
            throw DataError("split: class '" + label + "' has " +
                            std::to_string(indices.size()) + " rows, need at least 2");
        }
        std::vector<std::size_t> order = content_canonical_order(table, indices);
        shuffle(order, rng);
        const auto train_count = static_cast<std::size_t>(
            std::floor(static_cast<double>(order.size()) * ratio + 0.5));
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < train_count ? plan.train_indices : plan.test_indices).push_back(order[i]);
        }
    }
    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());
    return plan;
}

FoldPlan stratified_kfold(const FlowTable& table, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw ParameterError("kfold: k must be >= 2");
    }
    FoldPlan plan;
    plan.seed = seed;
    plan.folds.assign(k, {});

    Rng rng(seed);
    std::size_t cursor = 0;  // persists across classes to balance fold sizes
    for (auto& [label, indices] : rows_by_class(table)) {
        if (indices.size() < k) {
            throw DataError("kfold: class '" + label + "' has " +
                            std::to_string(indices.size()) + " rows, need at least " +
                            std::to_string(k));
        }
        std::vector<std::size_t> order = content_canonical_order(table, indices);
        shuffle(order, rng);
        for (std::size_t i : order) {
            plan.folds[cursor % k].push_back(i);
            ++cursor;
        }
    }
    for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
    return plan;
}

FlowTable generate_synthetic(std::size_t n_normal, std::size_t n_attack,
                             std::size_t features, double separation, std::uint64_t seed) {
    if (features < 8) {
        throw ParameterError("synthetic: need at least 8 features");
    }
    if (n_normal < 1 || n_attack < 1) {
        throw ParameterError("synthetic: need at least one row per class");
    }

    Rng rng(seed);
    std::vector<double> baseline(features);
    for (auto& b : baseline) b = rng.uniform(0.3, 0.7);

    // Seeded choice of ceil(F/4) shifted features.
    const std::size_t n_shifted = (features + 3) / 4;
    std::vector<std::size_t> feature_order(features);
    for (std::size_t i = 0; i < features; ++i) feature_order[i] = i;
    shuffle(feature_order, rng);
    std::vector<bool> shifted(features, false);
    for (std::size_t i = 0; i < n_shifted; ++i) shifted[feature_order[i]] = true;

    FlowTable table;
    for (std::size_t i = 0; i < features; ++i) {
        table.feature_names.push_back("f" + std::to_string(i));
    }
    const std::size_t total = n_normal + n_attack;
    table.values.resize(total * features);
    table.labels.resize(total);

    constexpr double kBand = 0.25;
    for (std::size_t r = 0; r < total; ++r) {
        const bool attack = r >= n_normal;
        table.labels[r] = attack ? "ATTACK" : "NORMAL";
        for (std::size_t c = 0; c < features; ++c) {
            double v = baseline[c] + rng.uniform(-kBand, kBand);
            if (attack && shifted[c]) v += separation;
            table.values[r * features + c] = v;
        }
    }

    // Shuffle row order so class blocks do not survive into the file.
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    shuffle(order, rng);
    FlowTable out = table.select_rows(order);
    out.provenance.source = "synthetic(seed=" + std::to_string(seed) + ")";
    out.provenance.log.push_back(
        "synthetic: " + std::to_string(n_normal) + " normal + " + std::to_string(n_attack) +
        " attack rows, " + std::to_string(features) + " features, separation " +
        std::to_string(separation));
    return out;
}

void write_csv(const FlowTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("csv: cannot open '" + path + "' for writing");
    }
    for (const auto& name : table.feature_names) out << name << ',';
    out << "label\n";
    out.precision(17);
    for (std::size_t r = 0; r < table.row_count(); ++r) {
        for (std::size_t c = 0; c < table.feature_count(); ++c) out << table.at(r, c) << ',';
        out << table.labels[r] << '\n';
    }
    if (!out) {
        throw DataError("csv: write failed for '" + path + "'");
    }
}

void write_sidecar(const FlowTable& table, const NormalizationSpec& spec,
                   const std::string& path) {
    nlohmann::ordered_json j;
    j["provenance"] = table.provenance.to_json();
    j["normalization"] = spec.to_json();
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("sidecar: cannot open '" + path + "' for writing");
    }
    out << j.dump(2) << '\n';
}

}  // namespace flowids
