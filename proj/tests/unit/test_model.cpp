#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowids/model.hpp"

using namespace flowids;

namespace {

ArchitectureConfig tiny_arch(std::size_t features = 8) {
    ArchitectureConfig arch;
    arch.input_features = features;
    arch.conv_blocks = {{2, 2}, {2, 2}};
    arch.pool = 2;
    arch.lstm_units = {2, 3};
    arch.dense_units = 4;
    arch.dropout_rate = 0.4;
    return arch;
}

void zero_parameters(HybridModel& model) {
    for (Tensor* p : model.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) p->data()[i] = 0.0;
    }
}

std::vector<double> random_input(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    return x;
}

std::string temp_path(const char* name) {
    return std::string("model_test_") + name;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("default architecture shape chain for 100 features") {
    ArchitectureConfig arch;
    arch.input_features = 100;
    const auto chain = arch.cnn_length_chain();
    const std::vector<std::size_t> expected = {100, 98, 49, 47, 23, 21, 10};
    CHECK(chain == expected);
    CHECK(arch.flattened_size() == 640);
    CHECK(arch.concat_size() == 768);
}

TEST_CASE("too-small input errors with the failing stage") {
    ArchitectureConfig arch;
    arch.input_features = 4;  // 4 -> 2 -> 1, second conv block needs >= 3
    try {
        arch.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("conv block 2") != std::string::npos);
    }
}

TEST_CASE("same seed and config build identical parameters") {
    HybridModel a(tiny_arch(), 99);
    HybridModel b(tiny_arch(), 99);
    auto pa = a.parameters();
    auto pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->size() == pb[i]->size());
        for (std::size_t j = 0; j < pa[i]->size(); ++j) {
            CHECK(pa[i]->data()[j] == pb[i]->data()[j]);
        }
    }
    HybridModel c(tiny_arch(), 100);
    bool any_different = false;
    auto pc = c.parameters();
    for (std::size_t j = 0; j < pa[0]->size(); ++j) {
        if (pa[0]->data()[j] != pc[0]->data()[j]) any_different = true;
    }
    CHECK(any_different);
}

TEST_CASE("parameter names are fixed by the config") {
    HybridModel model(tiny_arch(), 1);
    const auto names = model.parameter_names();
    CHECK(names.size() == 2 * 2 + 2 * 12 + 4);
    CHECK(names.front() == "conv1.kernels");
    CHECK(names[2] == "conv2.kernels");
    CHECK(names[4] == "lstm1.w_i");
    CHECK(names.back() == "output.b");
    CHECK(model.parameter("lstm2.u_f").shape() == std::vector<std::size_t>{3, 3});
    CHECK_THROWS_AS(model.parameter("nope"), ParameterError);
}

TEST_CASE("zero-parameter model outputs probability one half") {
    HybridModel model(tiny_arch(), 7);
    zero_parameters(model);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_input(8, 50 + trial);
        ForwardBundle b = model.forward(x, Mode::Infer);
        CHECK(b.logit == 0.0);
        CHECK(b.probability == 0.5);
        auto [l_vec, f_vec] = model.branch_outputs(x);
        for (std::size_t i = 0; i < l_vec.size(); ++i) CHECK(l_vec.at(i) == 0.0);
        for (std::size_t i = 0; i < f_vec.size(); ++i) CHECK(f_vec.at(i) == 0.0);
    }
}

TEST_CASE("inference is deterministic, dropout inert") {
    HybridModel model(tiny_arch(), 3);
    const auto x = random_input(8, 4);
    const double p1 = model.forward(x, Mode::Infer).probability;
    const double p2 = model.forward(x, Mode::Infer).probability;
    CHECK(p1 == p2);
    CHECK(p1 > 0.0);
    CHECK(p1 < 1.0);
}

TEST_CASE("sigmoid head is strictly increasing in the logit") {
    double prev = stable_sigmoid(-5.0);
    for (double z = -4.5; z <= 5.0; z += 0.5) {
        const double p = stable_sigmoid(z);
        CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("predict thresholding") {
    HybridModel model(tiny_arch(), 7);
    zero_parameters(model);  // p == 0.5 everywhere
    const auto x = random_input(8, 1);
    CHECK(predict(model, x, 0.5) == 1);  // boundary is inclusive
    CHECK(predict(model, x) == 1);
    CHECK(predict(model, x, 1.0) == 0);
}

TEST_CASE("forward rejects wrong feature counts") {
    HybridModel model(tiny_arch(), 2);
    CHECK_THROWS_AS(model.forward(random_input(7, 1), Mode::Infer), DimensionError);
    CHECK_THROWS_AS(model.forward(random_input(8, 1), Mode::Train, nullptr),
                    ParameterError);
}

TEST_CASE("branches are independent") {
    const auto x = random_input(8, 21);

    HybridModel base(tiny_arch(), 5);
    auto [l0, f0] = base.branch_outputs(x);

    HybridModel cnn_perturbed(tiny_arch(), 5);
    cnn_perturbed.conv_params[0].kernels.at(0) += 0.25;
    cnn_perturbed.conv_params[1].bias.at(1) -= 0.5;
    auto [l1, f1] = cnn_perturbed.branch_outputs(x);
    for (std::size_t i = 0; i < l0.size(); ++i) CHECK(l1.at(i) == l0.at(i));

    HybridModel lstm_perturbed(tiny_arch(), 5);
    lstm_perturbed.lstm_params[0].w_c.at(0, 0) += 0.25;
    lstm_perturbed.lstm_params[1].u_o.at(1, 1) -= 0.5;
    auto [l2, f2] = lstm_perturbed.branch_outputs(x);
    for (std::size_t i = 0; i < f0.size(); ++i) CHECK(f2.at(i) == f0.at(i));
}

TEST_CASE("save/load round-trips parameters and predictions bit-exactly") {
    const std::string path = temp_path("roundtrip.clstm");
    HybridModel model(tiny_arch(), 11);
    model.metadata = nlohmann::ordered_json{{"pipeline", {{"note", "unit"}}}};
    save_model(model, path);
    HybridModel loaded = load_model(path);

    CHECK(loaded.init_seed() == 11);
    CHECK(loaded.metadata.at("pipeline").at("note") == "unit");
    auto pa = model.parameters();
    auto pb = loaded.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pa[i]->size(); ++j) {
            CHECK(pa[i]->data()[j] == pb[i]->data()[j]);
        }
    }
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = random_input(8, 1000 + trial);
        CHECK(model.forward(x, Mode::Infer).probability ==
              loaded.forward(x, Mode::Infer).probability);
    }
    std::remove(path.c_str());
}

TEST_CASE("load failure modes are distinct named errors") {
    const std::string path = temp_path("corrupt.clstm");
    HybridModel model(tiny_arch(), 13);
    save_model(model, path);

    std::ifstream in(path, std::ios::binary);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    SUBCASE("bad magic") {
        std::string bad = blob;
        bad[0] = 'X';
        std::ofstream(path, std::ios::binary).write(bad.data(), bad.size());
        CHECK_THROWS_AS(load_model(path), BadMagicError);
    }
    SUBCASE("unsupported version names both versions") {
        std::string bad = blob;
        bad[8] = 9;
        std::ofstream(path, std::ios::binary).write(bad.data(), bad.size());
        try {
            load_model(path);
            FAIL("expected UnsupportedVersionError");
        } catch (const UnsupportedVersionError& e) {
            const std::string what = e.what();
            CHECK(what.find("9") != std::string::npos);
            CHECK(what.find("1") != std::string::npos);
        }
    }
    SUBCASE("truncation mid-tensor") {
        std::string bad = blob.substr(0, blob.size() - 64);
        std::ofstream(path, std::ios::binary).write(bad.data(), bad.size());
        CHECK_THROWS_AS(load_model(path), TruncatedFileError);
    }
    SUBCASE("truncation inside the fixed header") {
        std::string bad = blob.substr(0, 10);
        std::ofstream(path, std::ios::binary).write(bad.data(), bad.size());
        CHECK_THROWS_AS(load_model(path), TruncatedFileError);
    }
    std::remove(path.c_str());
}

TEST_CASE("architecture json reconstructs the config") {
    ArchitectureConfig arch = tiny_arch(32);
    arch.lstm_units = {5, 6, 7};
    ArchitectureConfig back = architecture_from_json(architecture_to_json(arch));
    CHECK(back.input_features == 32);
    CHECK(back.conv_blocks.size() == 2);
    CHECK(back.lstm_units == std::vector<std::size_t>{5, 6, 7});
    CHECK(back.dropout_rate == arch.dropout_rate);
}

TEST_SUITE_END();
