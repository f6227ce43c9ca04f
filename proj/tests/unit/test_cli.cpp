#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowids/cli.hpp"

using namespace flowids;

namespace {

int run(std::vector<std::string> args) {
    std::vector<const char*> argv = {"flowids"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

struct Cleanup {
    std::vector<std::string> paths;
    ~Cleanup() {
        for (const auto& p : paths) std::remove(p.c_str());
    }
};

// Small but trainable fixture: 24 rows, 10 features, separable.
void make_fixture(const std::string& path) {
    std::ostringstream out;
    out << "f0,f1,f2,f3,f4,f5,f6,f7,f8,f9,label\n";
    for (int r = 0; r < 24; ++r) {
        const bool attack = r % 2 == 1;
        for (int c = 0; c < 10; ++c) {
            out << (attack ? 0.8 : 0.2) + 0.01 * ((r * 7 + c * 3) % 10) << ",";
        }
        out << (attack ? "DOS_ATTACK" : "NORMAL") << "\n";
    }
    write_file(path, out.str());
}

const std::vector<std::string> kTinyArch = {
    "--conv-blocks", "2", "--filters", "4", "--kernel-size", "2",
    "--lstm-units",  "4,6", "--dense-units", "8"};

std::vector<std::string> with_arch(std::vector<std::string> args) {
    args.insert(args.end(), kTinyArch.begin(), kTinyArch.end());
    return args;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("preprocess writes a normalized snapshot with binary labels") {
    Cleanup cleanup{{"cli_fix.csv", "cli_pre.csv", "cli_pre.csv.json"}};
    make_fixture("cli_fix.csv");
    CHECK(run({"preprocess", "--data", "cli_fix.csv", "--out", "cli_pre.csv"}) == 0);

    std::ifstream in("cli_pre.csv");
    std::string header;
    std::getline(in, header);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto last_comma = line.rfind(',');
        const std::string label = line.substr(last_comma + 1);
        CHECK((label == "0" || label == "1"));
        std::stringstream cells(line.substr(0, last_comma));
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            const double v = std::stod(cell);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK(rows == 24);
    CHECK(slurp("cli_pre.csv.json").find("normalization") != std::string::npos);
}

TEST_CASE("preprocess with a missing label column exits nonzero naming it") {
    Cleanup cleanup{{"cli_fix2.csv", "unused.csv"}};
    make_fixture("cli_fix2.csv");
    CHECK(run({"preprocess", "--data", "cli_fix2.csv", "--out", "unused.csv",
               "--label-column", "verdict"}) == 2);
}

TEST_CASE("preprocess reruns are byte-identical") {
    Cleanup cleanup{{"cli_fix3.csv", "cli_a.csv", "cli_a.csv.json", "cli_b.csv",
                     "cli_b.csv.json"}};
    make_fixture("cli_fix3.csv");
    REQUIRE(run({"preprocess", "--data", "cli_fix3.csv", "--out", "cli_a.csv"}) == 0);
    REQUIRE(run({"preprocess", "--data", "cli_fix3.csv", "--out", "cli_b.csv"}) == 0);
    CHECK(slurp("cli_a.csv") == slurp("cli_b.csv"));
}

TEST_CASE("train writes a model and a report echoing the config") {
    Cleanup cleanup{{"cli_fix4.csv", "cli_model.clstm", "cli_train.json"}};
    make_fixture("cli_fix4.csv");
    const int code = run(with_arch({"train", "--data", "cli_fix4.csv", "--model",
                                    "cli_model.clstm", "--out", "cli_train.json", "--seed",
                                    "7", "--epochs", "3", "--batch-size", "16", "--lr",
                                    "0.001", "--val-fraction", "0.25"}));
    REQUIRE(code == 0);

    nlohmann::json report = nlohmann::json::parse(slurp("cli_train.json"));
    CHECK(report["seed"] == 7);
    CHECK(report["config"]["training"]["batch_size"] == 16);
    CHECK(report["config"]["training"]["learning_rate"] == 0.001);
    CHECK(report["config"]["architecture"]["lstm_units"] == std::vector<int>{4, 6});
    CHECK(report["results"]["train_run"]["history"].size() == 3);
    CHECK(slurp("cli_model.clstm").substr(0, 8) == "CLSTMIDS");
}

TEST_CASE("invalid dropout is a usage error before any computation") {
    const int code = run({"train", "--data", "does_not_exist.csv", "--dropout", "1.5"});
    CHECK(code == 1);
}

TEST_CASE("flag beats config file beats built-in default") {
    Cleanup cleanup{{"cli_fix5.csv", "cli_cfg.ini", "m1.clstm", "m2.clstm", "m3.clstm",
                     "r1.json", "r2.json", "r3.json"}};
    make_fixture("cli_fix5.csv");
    write_file("cli_cfg.ini",
               "# config file for the override test\n"
               "[train]\n"
               "dropout=0.2\n");

    auto run_train = [&](std::vector<std::string> extra, const std::string& model,
                         const std::string& report) {
        auto args = with_arch({"train", "--data", "cli_fix5.csv", "--epochs", "1",
                               "--val-fraction", "0.25", "--model", model, "--out", report});
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    };

    REQUIRE(run_train({}, "m1.clstm", "r1.json") == 0);  // built-in default
    REQUIRE(run_train({"--config", "cli_cfg.ini"}, "m2.clstm", "r2.json") == 0);
    REQUIRE(run_train({"--config", "cli_cfg.ini", "--dropout", "0.1"}, "m3.clstm",
                      "r3.json") == 0);

    CHECK(nlohmann::json::parse(slurp("r1.json"))["config"]["architecture"]["dropout_rate"] ==
          0.4);
    CHECK(nlohmann::json::parse(slurp("r2.json"))["config"]["architecture"]["dropout_rate"] ==
          0.2);
    CHECK(nlohmann::json::parse(slurp("r3.json"))["config"]["architecture"]["dropout_rate"] ==
          0.1);
}

TEST_CASE("evaluate and predict work from a saved model") {
    Cleanup cleanup{{"cli_fix6.csv", "cli_m.clstm", "cli_t.json", "cli_e.json",
                     "cli_p.csv"}};
    make_fixture("cli_fix6.csv");
    REQUIRE(run(with_arch({"train", "--data", "cli_fix6.csv", "--model", "cli_m.clstm",
                           "--out", "cli_t.json", "--epochs", "3", "--val-fraction",
                           "0.25"})) == 0);

    CHECK(run({"evaluate", "--model", "cli_m.clstm", "--data", "cli_fix6.csv", "--out",
               "cli_e.json"}) == 0);
    nlohmann::json report = nlohmann::json::parse(slurp("cli_e.json"));
    CHECK(report["results"]["confusion"]["tp"].get<int>() +
              report["results"]["confusion"]["tn"].get<int>() +
              report["results"]["confusion"]["fp"].get<int>() +
              report["results"]["confusion"]["fn"].get<int>() ==
          24);

    CHECK(run({"predict", "--model", "cli_m.clstm", "--data", "cli_fix6.csv", "--out",
               "cli_p.csv", "--label-column", "label"}) == 0);
    std::ifstream in("cli_p.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 25);  // header + one row per input row
}

TEST_CASE("crossval emits a report with k folds") {
    Cleanup cleanup{{"cli_fix7.csv", "cli_cv.json"}};
    make_fixture("cli_fix7.csv");
    REQUIRE(run(with_arch({"crossval", "--data", "cli_fix7.csv", "--out", "cli_cv.json",
                           "--k", "3", "--epochs", "2", "--val-fraction", "0.25"})) == 0);
    nlohmann::json report = nlohmann::json::parse(slurp("cli_cv.json"));
    CHECK(report["results"]["folds"].size() == 3);
    CHECK(report["k"] == 3);
}

TEST_CASE("gradcheck subcommand exits zero when gradients agree") {
    CHECK(run({"gradcheck", "--seeds", "3"}) == 0);
}

TEST_CASE("synth generates the requested population") {
    Cleanup cleanup{{"cli_s.csv"}};
    REQUIRE(run({"synth", "--out", "cli_s.csv", "--normal", "11", "--attack", "22",
                 "--features", "9", "--seed", "5"}) == 0);
    std::ifstream in("cli_s.csv");
    std::string line;
    std::getline(in, line);  // header
    int normals = 0, attacks = 0;
    while (std::getline(in, line)) {
        if (line.find("NORMAL") != std::string::npos) ++normals;
        if (line.find("ATTACK") != std::string::npos) ++attacks;
    }
    CHECK(normals == 11);
    CHECK(attacks == 22);
}

TEST_CASE("unknown data files exit with the data error code") {
    CHECK(run({"evaluate", "--model", "missing.clstm", "--data", "missing.csv"}) == 2);
}

TEST_SUITE_END();
