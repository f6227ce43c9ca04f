#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowids/layers.hpp"
#include "flowids/tensor.hpp"

namespace flowids {

struct ConvSpec {
    std::size_t filters = 64;
    std::size_t kernel_size = 3;
};

// Two-branch architecture: a CNN branch (conv+ReLU+maxpool stages, then
// flatten) and an LSTM branch (stacked layers, final hidden state), joined
// by concatenation and a dense head ending in a single sigmoid unit.
struct ArchitectureConfig {
    std::size_t input_features = 0;
    std::vector<ConvSpec> conv_blocks = {{64, 3}, {64, 3}, {64, 3}};
    std::size_t pool = 2;
    std::vector<std::size_t> lstm_units = {64, 128};
    std::size_t dense_units = 128;
    double dropout_rate = 0.4;

    // Sequence lengths through the CNN branch: input, then after each conv
    // and each pool. Throws ConfigError naming the failing stage.
    std::vector<std::size_t> cnn_length_chain() const;
    std::size_t flattened_size() const;
    std::size_t concat_size() const;
    void validate() const;
};

// Per-sample forward record. probability == sigmoid(logit) exactly; the
// caches are only populated meaningfully in train mode consumers.
struct ForwardBundle {
    double probability = 0.0;
    double logit = 0.0;
    std::vector<ConvCache> conv_caches;
    std::vector<PoolCache> pool_caches;
    FlattenCache flatten_cache;
    std::vector<LstmCache> lstm_caches;
    DenseCache hidden_cache;
    DropoutCache dropout_cache;
    DenseCache output_cache;
};

// Gradients for every parameter, aligned with HybridModel::parameter_names().
struct GradientSet {
    std::vector<Tensor> tensors;

    void add_in_place(const GradientSet& other);
    void scale_in_place(double factor);
};

class HybridModel {
public:
    // Builds and initializes all parameters deterministically from the seed:
    // weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero, drawn
    // in canonical parameter-name order from one SplitMix64 stream.
    HybridModel(ArchitectureConfig config, std::uint64_t seed);

    const ArchitectureConfig& config() const { return config_; }
    std::uint64_t init_seed() const { return init_seed_; }

    // Canonical ordered parameter names, fixed by the config alone. The
    // model file format and the optimizer both rely on this order.
    std::vector<std::string> parameter_names() const;
    Tensor& parameter(const std::string& name);
    const Tensor& parameter(const std::string& name) const;
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    // x is a length-F feature vector, reshaped internally to an [F x 1]
    // sequence consumed by both branches. Train mode needs an rng for
    // dropout; infer mode ignores it. Inputs are expected in [0, 1] after
    // preprocessing (not enforced).
    ForwardBundle forward(std::span<const double> x, Mode mode, Rng* rng = nullptr) const;

    // Backpropagates d(loss)/d(logit) through the bundle; returns parameter
    // gradients aligned with parameter_names().
    GradientSet backward(ForwardBundle& bundle, double dloss_dlogit) const;

    GradientSet zero_gradients() const;

    // Branch outputs for a given input, used by tests probing branch
    // independence: {lstm_final_hidden L, cnn_flattened f}.
    std::pair<Tensor, Tensor> branch_outputs(std::span<const double> x) const;

    // Free-form sidecar carried inside the model file header (preprocessing
    // settings, normalization spec, ...).
    nlohmann::ordered_json metadata;

    std::vector<ConvBlockParams> conv_params;
    std::vector<LstmParams> lstm_params;
    DenseParams hidden_params;
    DenseParams output_params;

private:
    ArchitectureConfig config_;
    std::uint64_t init_seed_ = 0;
};

int predict(const HybridModel& model, std::span<const double> x, double threshold = 0.5);

// Model file format "CLSTMIDS" v1 (all integers little-endian):
//   bytes 0-7    magic "CLSTMIDS"
//   bytes 8-11   u32 format version (= 1)
//   bytes 12-19  u64 JSON header length
//   then         UTF-8 JSON header: config, metadata, ordered tensor
//                manifest (name, shape, offset) and total data byte count
//   then         raw IEEE-754 doubles, little-endian, in manifest order
void save_model(const HybridModel& model, const std::string& path);
HybridModel load_model(const std::string& path);

nlohmann::ordered_json architecture_to_json(const ArchitectureConfig& config);
ArchitectureConfig architecture_from_json(const nlohmann::json& j);

}  // namespace flowids
