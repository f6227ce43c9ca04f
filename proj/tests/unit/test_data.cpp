#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "flowids/data.hpp"
#include "flowids/rng.hpp"

using namespace flowids;

namespace {

struct TempCsv {
    explicit TempCsv(const std::string& name, const std::string& content)
        : path("data_test_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
    std::string path;
};

FlowTable table_with(std::vector<std::string> names, std::vector<double> values,
                     std::vector<std::string> labels) {
    FlowTable t;
    t.feature_names = std::move(names);
    t.values = std::move(values);
    t.labels = std::move(labels);
    return t;
}

std::map<std::string, std::size_t> class_counts(const FlowTable& t,
                                                const std::vector<std::size_t>& idx) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t i : idx) counts[t.labels[i]]++;
    return counts;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("numeric csv passes through unchanged") {
    TempCsv csv("plain.csv",
                "a,b,label\n"
                "1.5,2,NORMAL\n"
                "3,4.25,ATTACK\n"
                "-1e2,0.5,NORMAL\n");
    FlowTable t = load_csv(csv.path, "label");
    REQUIRE(t.row_count() == 3);
    REQUIRE(t.feature_count() == 2);
    CHECK(t.at(0, 0) == 1.5);
    CHECK(t.at(1, 1) == 4.25);
    CHECK(t.at(2, 0) == -100.0);
    CHECK(t.labels[0] == "NORMAL");
}

TEST_CASE("non-numeric feature columns are label-encoded in first-appearance order") {
    TempCsv csv("proto.csv",
                "proto,x,label\n"
                "tcp,1,A\n"
                "udp,2,B\n"
                "tcp,3,A\n");
    FlowTable t = load_csv(csv.path, "label");
    CHECK(t.at(0, 0) == 0.0);
    CHECK(t.at(1, 0) == 1.0);
    CHECK(t.at(2, 0) == 0.0);
    CHECK(t.provenance.encodings.contains("proto"));
    CHECK(t.provenance.encodings["proto"]["tcp"] == 0.0);
    CHECK(t.provenance.encodings["proto"]["udp"] == 1.0);
}

TEST_CASE("ragged rows and missing labels are named parse errors") {
    TempCsv ragged("ragged.csv", "a,b,label\n1,2,x\n1,2\n");
    try {
        load_csv(ragged.path, "label");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    TempCsv plain("nolabel.csv", "a,b,c\n1,2,3\n");
    try {
        load_csv(plain.path, "verdict");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("verdict") != std::string::npos);
    }

    TempCsv empty("empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty.path, "label"), DataError);

    TempCsv headeronly("headeronly.csv", "a,label\n");
    CHECK_THROWS_AS(load_csv(headeronly.path, "label"), DataError);
}

TEST_CASE("an empty label column name loads an unlabeled file") {
    TempCsv csv("unlabeled.csv", "a,b\n1,2\n3,4\n");
    FlowTable t = load_csv(csv.path, "");
    CHECK(t.feature_count() == 2);
    CHECK(t.row_count() == 2);
    CHECK(t.labels == std::vector<std::string>{"", ""});
}

TEST_CASE("drop columns are removed before encoding") {
    TempCsv csv("drop.csv",
                "flow_id,src_ip,x,label\n"
                "f1,10.0.0.1,1,n\n"
                "f2,10.0.0.2,2,a\n");
    FlowTable t = load_csv(csv.path, "label", {"flow_id", "src_ip"});
    CHECK(t.feature_count() == 1);
    CHECK(t.feature_names[0] == "x");
}

TEST_CASE("clean drops non-finite rows then constant columns") {
    TempCsv csv("dirty.csv",
                "a,b,c,label\n"
                "1,7.0,2,n\n"
                "2,7.0,NaN,a\n"
                "3,7.0,4,n\n");
    FlowTable t = clean(load_csv(csv.path, "label"));
    CHECK(t.row_count() == 2);          // NaN row dropped
    CHECK(t.feature_count() == 2);      // constant column b dropped
    CHECK(t.feature_names == std::vector<std::string>{"a", "c"});
    CHECK(t.labels == std::vector<std::string>{"n", "n"});

    FlowTable again = clean(t);
    CHECK(again.row_count() == t.row_count());
    CHECK(again.feature_names == t.feature_names);
}

TEST_CASE("clean leaves finite non-constant tables unchanged") {
    FlowTable t = table_with({"a"}, {1, 2, 3}, {"0", "1", "0"});
    FlowTable cleaned = clean(t);
    CHECK(cleaned.values == t.values);
    CHECK(cleaned.labels == t.labels);
}

TEST_CASE("clean errors when every row is dropped") {
    const double nan = std::nan("");
    FlowTable t = table_with({"a"}, {nan, nan}, {"0", "1"});
    CHECK_THROWS_AS(clean(t), DataError);
}

TEST_CASE("binarize maps normal to 0 and everything else to 1") {
    FlowTable t = table_with({"a"}, {1, 2, 3}, {"NORMAL", "MITM_DOS", "STOP_APP"});
    FlowTable b = binarize_labels(t, "NORMAL");
    CHECK(b.labels == std::vector<std::string>{"0", "1", "1"});

    FlowTable twice = binarize_labels(b, "NORMAL");
    CHECK(twice.labels == b.labels);  // idempotent

    FlowTable cased = table_with({"a"}, {1, 2}, {"normal", "Normal"});
    CHECK(binarize_labels(cased, "NORMAL").labels == std::vector<std::string>{"0", "0"});
}

TEST_CASE("binarize records a warning when nothing matches") {
    FlowTable t = table_with({"a"}, {1, 2}, {"DOS", "MITM"});
    FlowTable b = binarize_labels(t, "NORMAL");
    CHECK(b.labels == std::vector<std::string>{"1", "1"});
    bool warned = false;
    for (const auto& line : b.provenance.log) {
        if (line.find("warning") != std::string::npos) warned = true;
    }
    CHECK(warned);
}

TEST_CASE("minmax fit and apply") {
    FlowTable t = table_with({"a"}, {2, 4, 6}, {"0", "1", "0"});
    NormalizationSpec spec = minmax_fit(t, FitScope::TrainOnly);
    FlowTable n = minmax_apply(spec, t);
    CHECK(n.at(0, 0) == 0.0);
    CHECK(n.at(1, 0) == 0.5);
    CHECK(n.at(2, 0) == 1.0);

    FlowTable out_of_range = table_with({"a"}, {8}, {"1"});
    CHECK(minmax_apply(spec, out_of_range).at(0, 0) == doctest::Approx(1.5));  // unclamped

    FlowTable constant = table_with({"a"}, {5, 5}, {"0", "1"});
    NormalizationSpec cspec = minmax_fit(constant, FitScope::TrainOnly);
    CHECK(minmax_apply(cspec, constant).at(0, 0) == 0.0);

    FlowTable other = table_with({"zzz"}, {1}, {"0"});
    CHECK_THROWS_AS(minmax_apply(spec, other), DataError);
}

TEST_CASE("minmax over its own fit table stays inside the unit interval") {
    Rng rng(4);
    FlowTable t;
    t.feature_names = {"a", "b", "c"};
    for (int r = 0; r < 40; ++r) {
        for (int c = 0; c < 3; ++c) t.values.push_back(rng.uniform(-50.0, 50.0));
        t.labels.push_back(r % 2 ? "1" : "0");
    }
    FlowTable n = minmax_apply(minmax_fit(t, FitScope::TrainOnly), t);
    double lo = 1e9, hi = -1e9;
    for (double v : n.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);  // boundary cells hit exactly
    CHECK(hi == 1.0);
}

TEST_CASE("stratified split reproduces the published class arithmetic") {
    // 666 normal / 6660 attack at 70:30, train = round-half-up(n * 0.7)
    FlowTable t;
    t.feature_names = {"a"};
    Rng rng(2);
    for (int i = 0; i < 666; ++i) {
        t.values.push_back(rng.uniform(0, 1));
        t.labels.push_back("0");
    }
    for (int i = 0; i < 6660; ++i) {
        t.values.push_back(rng.uniform(0, 1));
        t.labels.push_back("1");
    }
    SplitPlan plan = stratified_split(t, 0.7, 42);
    auto train_counts = class_counts(t, plan.train_indices);
    auto test_counts = class_counts(t, plan.test_indices);
    CHECK(train_counts["0"] == 466);
    CHECK(train_counts["1"] == 4662);
    CHECK(test_counts["0"] == 200);
    CHECK(test_counts["1"] == 1998);
}

TEST_CASE("round-half-up on a five-five table") {
    FlowTable t;
    t.feature_names = {"a"};
    for (int i = 0; i < 10; ++i) {
        t.values.push_back(i);
        t.labels.push_back(i < 5 ? "0" : "1");
    }
    SplitPlan plan = stratified_split(t, 0.7, 1);  // round(3.5) = 4
    auto train_counts = class_counts(t, plan.train_indices);
    CHECK(train_counts["0"] == 4);
    CHECK(train_counts["1"] == 4);
    CHECK(plan.test_indices.size() == 2);
}

TEST_CASE("split is a partition and deterministic") {
    FlowTable t;
    t.feature_names = {"a"};
    Rng rng(6);
    for (int i = 0; i < 57; ++i) {
        t.values.push_back(rng.uniform(0, 1));
        t.labels.push_back(i % 3 == 0 ? "0" : "1");
    }
    SplitPlan p1 = stratified_split(t, 0.7, 9);
    SplitPlan p2 = stratified_split(t, 0.7, 9);
    CHECK(p1.train_indices == p2.train_indices);
    CHECK(p1.test_indices == p2.test_indices);

    std::set<std::size_t> all(p1.train_indices.begin(), p1.train_indices.end());
    for (std::size_t i : p1.test_indices) CHECK(all.insert(i).second);
    CHECK(all.size() == t.row_count());
}

TEST_CASE("split is equivariant under row permutation") {
    FlowTable t;
    t.feature_names = {"a", "b"};
    Rng rng(13);
    for (int i = 0; i < 30; ++i) {
        t.values.push_back(rng.uniform(0, 1));
        t.values.push_back(rng.uniform(0, 1));
        t.labels.push_back(i % 4 == 0 ? "0" : "1");
    }
    std::vector<std::size_t> perm(t.row_count());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng prng(99);
    shuffle(perm, prng);
    FlowTable permuted = t.select_rows(perm);

    auto side_multiset = [](const FlowTable& table, const std::vector<std::size_t>& idx) {
        std::multiset<std::pair<std::vector<double>, std::string>> rows;
        for (std::size_t i : idx) {
            const auto r = table.row(i);
            rows.insert({std::vector<double>(r.begin(), r.end()), table.labels[i]});
        }
        return rows;
    };

    SplitPlan p1 = stratified_split(t, 0.7, 5);
    SplitPlan p2 = stratified_split(permuted, 0.7, 5);
    CHECK(side_multiset(t, p1.train_indices) == side_multiset(permuted, p2.train_indices));
    CHECK(side_multiset(t, p1.test_indices) == side_multiset(permuted, p2.test_indices));
}

TEST_CASE("split rejects classes with fewer than two rows") {
    FlowTable t = table_with({"a"}, {1, 2, 3}, {"0", "1", "1"});
    CHECK_THROWS_AS(stratified_split(t, 0.7, 1), DataError);
    CHECK_THROWS_AS(stratified_split(t, 0.0, 1), ParameterError);
}

TEST_CASE("kfold round-robin trace on a six-five split") {
    FlowTable t;
    t.feature_names = {"a"};
    for (int i = 0; i < 11; ++i) {
        t.values.push_back(i);
        t.labels.push_back(i < 6 ? "maj" : "min");
    }
    FoldPlan plan = stratified_kfold(t, 5, 7);
    REQUIRE(plan.folds.size() == 5);
    // The fold cursor persists across classes: one fold gets the extra
    // majority row, every fold gets exactly one minority row.
    int heavy_folds = 0;
    for (const auto& fold : plan.folds) {
        auto counts = class_counts(t, fold);
        const std::size_t maj = counts["maj"];
        const std::size_t min = counts["min"];
        CHECK(min == 1);
        const bool is_one_one = maj == 1;
        const bool is_two_one = maj == 2;
        CHECK((is_one_one || is_two_one));
        if (is_two_one) ++heavy_folds;
    }
    CHECK(heavy_folds == 1);
}

TEST_CASE("kfold partitions the index set deterministically") {
    FlowTable t;
    t.feature_names = {"a"};
    Rng rng(3);
    for (int i = 0; i < 41; ++i) {
        t.values.push_back(rng.uniform(0, 1));
        t.labels.push_back(i % 5 == 0 ? "0" : "1");
    }
    FoldPlan p1 = stratified_kfold(t, 5, 11);
    FoldPlan p2 = stratified_kfold(t, 5, 11);
    for (std::size_t f = 0; f < 5; ++f) CHECK(p1.folds[f] == p2.folds[f]);

    std::set<std::size_t> seen;
    for (const auto& fold : p1.folds) {
        for (std::size_t i : fold) CHECK(seen.insert(i).second);
    }
    CHECK(seen.size() == t.row_count());
}

TEST_CASE("kfold per-class fold counts stay within one of n_c / k") {
    Rng config_rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n0 = 5 + config_rng.next_below(40);
        const std::size_t n1 = 5 + config_rng.next_below(40);
        FlowTable t;
        t.feature_names = {"a"};
        for (std::size_t i = 0; i < n0 + n1; ++i) {
            t.values.push_back(config_rng.uniform(0, 1));
            t.labels.push_back(i < n0 ? "0" : "1");
        }
        FoldPlan plan = stratified_kfold(t, 5, trial);
        for (const auto& fold : plan.folds) {
            auto counts = class_counts(t, fold);
            CHECK(std::abs(static_cast<double>(counts["0"]) - n0 / 5.0) < 1.0);
            CHECK(std::abs(static_cast<double>(counts["1"]) - n1 / 5.0) < 1.0);
        }
    }
}

TEST_CASE("kfold rejects classes smaller than k") {
    FlowTable t;
    t.feature_names = {"a"};
    for (int i = 0; i < 9; ++i) {
        t.values.push_back(i);
        t.labels.push_back(i < 3 ? "0" : "1");
    }
    CHECK_THROWS_AS(stratified_kfold(t, 5, 1), DataError);
}

TEST_CASE("synthetic generator determinism and class structure") {
    FlowTable a = generate_synthetic(40, 80, 12, 2.0, 5);
    FlowTable b = generate_synthetic(40, 80, 12, 2.0, 5);
    CHECK(a.values == b.values);
    CHECK(a.labels == b.labels);

    std::size_t normals = 0, attacks = 0;
    for (const auto& label : a.labels) {
        if (label == "NORMAL") ++normals;
        if (label == "ATTACK") ++attacks;
    }
    CHECK(normals == 40);
    CHECK(attacks == 80);

    CHECK_THROWS_AS(generate_synthetic(10, 10, 4, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(generate_synthetic(0, 10, 12, 1.0, 1), ParameterError);
}

TEST_CASE("zero separation draws both classes from one distribution") {
    FlowTable t = generate_synthetic(400, 400, 10, 0.0, 3);
    std::vector<double> mean0(10, 0.0), mean1(10, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        const bool attack = t.labels[r] == "ATTACK";
        for (std::size_t c = 0; c < 10; ++c) {
            (attack ? mean1[c] : mean0[c]) += t.at(r, c);
        }
        attack ? ++n1 : ++n0;
    }
    for (std::size_t c = 0; c < 10; ++c) {
        CHECK(std::abs(mean0[c] / n0 - mean1[c] / n1) < 0.05);
    }
}

TEST_CASE("synthetic csv round-trips through the loader") {
    FlowTable t = generate_synthetic(15, 25, 9, 1.5, 8);
    write_csv(t, "data_test_roundtrip.csv");
    FlowTable back = load_csv("data_test_roundtrip.csv", "label");
    REQUIRE(back.row_count() == t.row_count());
    REQUIRE(back.feature_count() == t.feature_count());
    for (std::size_t i = 0; i < t.values.size(); ++i) CHECK(back.values[i] == t.values[i]);
    CHECK(back.labels == t.labels);
    std::remove("data_test_roundtrip.csv");
}

TEST_SUITE_END();
