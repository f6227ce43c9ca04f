#include "flowids/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flowids/errors.hpp"

namespace flowids {

namespace {

// Enumerates (name, tensor) in the canonical order the file format and the
// optimizer rely on: conv blocks, LSTM layers (gates i, f, o, c; w, u, b
// within each gate), hidden dense, output dense.
template <typename ModelT, typename Fn>
void enumerate_parameters(ModelT& model, Fn&& fn) {
    for (std::size_t i = 0; i < model.conv_params.size(); ++i) {
        const std::string prefix = "conv" + std::to_string(i + 1) + ".";
        fn(prefix + "kernels", model.conv_params[i].kernels);
        fn(prefix + "bias", model.conv_params[i].bias);
    }
    for (std::size_t i = 0; i < model.lstm_params.size(); ++i) {
        const std::string prefix = "lstm" + std::to_string(i + 1) + ".";
        auto& p = model.lstm_params[i];
        fn(prefix + "w_i", p.w_i);
        fn(prefix + "u_i", p.u_i);
        fn(prefix + "b_i", p.b_i);
        fn(prefix + "w_f", p.w_f);
        fn(prefix + "u_f", p.u_f);
        fn(prefix + "b_f", p.b_f);
        fn(prefix + "w_o", p.w_o);
        fn(prefix + "u_o", p.u_o);
        fn(prefix + "b_o", p.b_o);
        fn(prefix + "w_c", p.w_c);
        fn(prefix + "u_c", p.u_c);
        fn(prefix + "b_c", p.b_c);
    }
    fn("hidden.w", model.hidden_params.w);
    fn("hidden.b", model.hidden_params.b);
    fn("output.w", model.output_params.w);
    fn("output.b", model.output_params.b);
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(Tensor& t, Rng& rng, double limit) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.data()[i] = rng.uniform(-limit, limit);
    }
}

constexpr char kMagic[8] = {'C', 'L', 'S', 'T', 'M', 'I', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t read_u64_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void append_f64_le(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    out.append(reinterpret_cast<const char*>(&bits), sizeof(bits));
}

double parse_f64_le(const unsigned char* p) {
    std::uint64_t bits = read_u64_le(p, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
}

}  // namespace

std::vector<std::size_t> ArchitectureConfig::cnn_length_chain() const {
    std::vector<std::size_t> chain;
    std::size_t length = input_features;
    chain.push_back(length);
    for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
        const std::size_t k = conv_blocks[i].kernel_size;
        if (length < k) {
            throw ConfigError("conv block " + std::to_string(i + 1) + " needs input length >= " +
                              std::to_string(k) + ", got " + std::to_string(length));
        }
        length = length - k + 1;
        chain.push_back(length);
        if (length < pool) {
            throw ConfigError("pool after conv block " + std::to_string(i + 1) +
                              " needs input length >= " + std::to_string(pool) + ", got " +
                              std::to_string(length));
        }
        length = length / pool;
        chain.push_back(length);
    }
    return chain;
}

std::size_t ArchitectureConfig::flattened_size() const {
    return cnn_length_chain().back() * conv_blocks.back().filters;
}

std::size_t ArchitectureConfig::concat_size() const {
    return lstm_units.back() + flattened_size();
}

void ArchitectureConfig::validate() const {
    if (input_features == 0) {
        throw ConfigError("architecture: input_features must be positive");
    }
    if (conv_blocks.empty()) {
        throw ConfigError("architecture: at least one conv block required");
    }
    for (const auto& block : conv_blocks) {
        if (block.filters == 0 || block.kernel_size == 0) {
            throw ConfigError("architecture: conv filters and kernel size must be positive");
        }
    }
    if (pool < 2) {
        throw ConfigError("architecture: pool extent must be >= 2");
    }
    if (lstm_units.empty()) {
        throw ConfigError("architecture: at least one LSTM layer required");
    }
    for (std::size_t units : lstm_units) {
        if (units == 0) throw ConfigError("architecture: LSTM units must be positive");
    }
    if (dense_units == 0) {
        throw ConfigError("architecture: dense_units must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("architecture: dropout rate must be in [0, 1)");
    }
    cnn_length_chain();  // throws if any stage collapses
}

void GradientSet::add_in_place(const GradientSet& other) {
    if (tensors.size() != other.tensors.size()) {
        throw DimensionError("gradients: mismatched parameter counts");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        for (std::size_t j = 0; j < tensors[i].size(); ++j) {
            tensors[i].data()[j] += other.tensors[i].data()[j];
        }
    }
}

void GradientSet::scale_in_place(double factor) {
    for (auto& t : tensors) {
        for (std::size_t j = 0; j < t.size(); ++j) t.data()[j] *= factor;
    }
}

HybridModel::HybridModel(ArchitectureConfig config, std::uint64_t seed)
    : config_(std::move(config)), init_seed_(seed) {
    config_.validate();

    std::size_t in_channels = 1;
    for (const auto& block : config_.conv_blocks) {
        ConvBlockParams p;
        p.kernels = Tensor({block.filters, block.kernel_size, in_channels});
        p.bias = Tensor({block.filters});
        conv_params.push_back(std::move(p));
        in_channels = block.filters;
    }
    std::size_t lstm_input = 1;
    for (std::size_t units : config_.lstm_units) {
        LstmParams p;
        p.w_i = Tensor({units, lstm_input});
        p.u_i = Tensor({units, units});
        p.b_i = Tensor({units});
        p.w_f = Tensor({units, lstm_input});
        p.u_f = Tensor({units, units});
        p.b_f = Tensor({units});
        p.w_o = Tensor({units, lstm_input});
        p.u_o = Tensor({units, units});
        p.b_o = Tensor({units});
        p.w_c = Tensor({units, lstm_input});
        p.u_c = Tensor({units, units});
        p.b_c = Tensor({units});
        lstm_params.push_back(std::move(p));
        lstm_input = units;
    }
    hidden_params.w = Tensor({config_.dense_units, config_.concat_size()});
    hidden_params.b = Tensor({config_.dense_units});
    output_params.w = Tensor({1, config_.dense_units});
    output_params.b = Tensor({1});

    // Weight draws happen in canonical parameter order; biases stay zero and
    // consume no rng state.
    Rng rng(seed);
    enumerate_parameters(*this, [&rng](const std::string& name, Tensor& t) {
        if (name.ends_with(".bias") || name.ends_with(".b") || name.find(".b_") != std::string::npos) {
            return;
        }
        double limit = 0.0;
        if (t.rank() == 3) {
            const std::size_t k = t.extent(1);
            limit = glorot_limit(k * t.extent(2), k * t.extent(0));
        } else {
            limit = glorot_limit(t.extent(1), t.extent(0));
        }
        fill_uniform(t, rng, limit);
    });
}

std::vector<std::string> HybridModel::parameter_names() const {
    std::vector<std::string> names;
    enumerate_parameters(*this, [&names](const std::string& name, const Tensor&) {
        names.push_back(name);
    });
    return names;
}

Tensor& HybridModel::parameter(const std::string& name) {
    Tensor* found = nullptr;
    enumerate_parameters(*this, [&](const std::string& n, Tensor& t) {
        if (n == name) found = &t;
    });
    if (!found) throw ParameterError("model: unknown parameter '" + name + "'");
    return *found;
}

const Tensor& HybridModel::parameter(const std::string& name) const {
    const Tensor* found = nullptr;
    enumerate_parameters(*this, [&](const std::string& n, const Tensor& t) {
        if (n == name) found = &t;
    });
    if (!found) throw ParameterError("model: unknown parameter '" + name + "'");
    return *found;
}

std::vector<Tensor*> HybridModel::parameters() {
    std::vector<Tensor*> out;
    enumerate_parameters(*this, [&out](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<const Tensor*> HybridModel::parameters() const {
    std::vector<const Tensor*> out;
    enumerate_parameters(*this,
                         [&out](const std::string&, const Tensor& t) { out.push_back(&t); });
    return out;
}

ForwardBundle HybridModel::forward(std::span<const double> x, Mode mode, Rng* rng) const {
    if (x.size() != config_.input_features) {
        throw DimensionError("model: expected " + std::to_string(config_.input_features) +
                             " features, got " + std::to_string(x.size()));
    }
    if (mode == Mode::Train && rng == nullptr) {
        throw ParameterError("model: train-mode forward requires an rng for dropout");
    }

    ForwardBundle bundle;
    Tensor sequence({x.size(), 1}, std::vector<double>(x.begin(), x.end()));

    // CNN branch: conv+ReLU then maxpool per block, then flatten.
    Tensor h = sequence;
    for (const auto& block : conv_params) {
        auto [activated, conv_cache] = conv_block_forward(h, block);
        bundle.conv_caches.push_back(std::move(conv_cache));
        auto [pooled, pool_cache] = maxpool_forward(activated, config_.pool);
        bundle.pool_caches.push_back(std::move(pool_cache));
        h = std::move(pooled);
    }
    auto [flat, flat_cache] = flatten(h);
    bundle.flatten_cache = std::move(flat_cache);

    // LSTM branch: each layer consumes the full hidden sequence of the one
    // below; the branch output is the last layer's final hidden state.
    Tensor lstm_in = std::move(sequence);
    Tensor branch_l;
    for (const auto& layer : lstm_params) {
        auto result = lstm_forward(lstm_in, layer);
        bundle.lstm_caches.push_back(std::move(result.cache));
        branch_l = std::move(result.final_hidden);
        lstm_in = std::move(result.all_hidden);
    }

    Tensor joined = concat(branch_l, flat);
    auto [hidden_out, hidden_cache] = dense_forward(joined, hidden_params, Activation::Relu);
    bundle.hidden_cache = std::move(hidden_cache);

    Rng inert(0);
    auto [dropped, drop_cache] = dropout_forward(
        hidden_out, config_.dropout_rate, mode, mode == Mode::Train ? *rng : inert);
    bundle.dropout_cache = std::move(drop_cache);

    auto [score, output_cache] = dense_forward(dropped, output_params, Activation::None);
    bundle.output_cache = std::move(output_cache);

    bundle.logit = score.at(0);
    bundle.probability = stable_sigmoid(bundle.logit);
    return bundle;
}

GradientSet HybridModel::backward(ForwardBundle& bundle, double dloss_dlogit) const {
    DenseGrads output_grads = dense_backward(output_params, bundle.output_cache,
                                             Tensor::from_vector({dloss_dlogit}));
    Tensor d_hidden_out = dropout_backward(bundle.dropout_cache, output_grads.input);
    DenseGrads hidden_grads = dense_backward(hidden_params, bundle.hidden_cache, d_hidden_out);

    const std::size_t l_size = config_.lstm_units.back();
    auto [d_branch_l, d_flat] = concat_backward(hidden_grads.input, l_size);

    // LSTM branch, top layer first. Only the top layer's final step feeds the
    // head, so its upstream is zero everywhere except the last row.
    std::vector<LstmGrads> lstm_grads(lstm_params.size());
    Tensor upstream;
    for (std::size_t layer = lstm_params.size(); layer-- > 0;) {
        if (layer == lstm_params.size() - 1) {
            upstream = Tensor(bundle.lstm_caches[layer].hidden.shape());
            const std::size_t steps = upstream.extent(0);
            for (std::size_t u = 0; u < upstream.extent(1); ++u) {
                upstream.at(steps - 1, u) = d_branch_l.at(u);
            }
        } else {
            upstream = std::move(lstm_grads[layer + 1].input);
        }
        lstm_grads[layer] = lstm_backward(lstm_params[layer], bundle.lstm_caches[layer], upstream);
    }

    // CNN branch, last block first.
    std::vector<ConvGrads> conv_grads(conv_params.size());
    Tensor d_pool_out = flatten_backward(bundle.flatten_cache, d_flat);
    for (std::size_t i = conv_params.size(); i-- > 0;) {
        Tensor d_conv_out = maxpool_backward(bundle.pool_caches[i], d_pool_out);
        conv_grads[i] = conv_block_backward(conv_params[i], bundle.conv_caches[i], d_conv_out);
        d_pool_out = std::move(conv_grads[i].input);
    }

    GradientSet grads;
    for (std::size_t i = 0; i < conv_grads.size(); ++i) {
        grads.tensors.push_back(std::move(conv_grads[i].kernels));
        grads.tensors.push_back(std::move(conv_grads[i].bias));
    }
    for (std::size_t i = 0; i < lstm_grads.size(); ++i) {
        auto& p = lstm_grads[i].params;
        grads.tensors.push_back(std::move(p.w_i));
        grads.tensors.push_back(std::move(p.u_i));
        grads.tensors.push_back(std::move(p.b_i));
        grads.tensors.push_back(std::move(p.w_f));
        grads.tensors.push_back(std::move(p.u_f));
        grads.tensors.push_back(std::move(p.b_f));
        grads.tensors.push_back(std::move(p.w_o));
        grads.tensors.push_back(std::move(p.u_o));
        grads.tensors.push_back(std::move(p.b_o));
        grads.tensors.push_back(std::move(p.w_c));
        grads.tensors.push_back(std::move(p.u_c));
        grads.tensors.push_back(std::move(p.b_c));
    }
    grads.tensors.push_back(std::move(hidden_grads.w));
    grads.tensors.push_back(std::move(hidden_grads.b));
    grads.tensors.push_back(std::move(output_grads.w));
    grads.tensors.push_back(std::move(output_grads.b));
    return grads;
}

GradientSet HybridModel::zero_gradients() const {
    GradientSet grads;
    for (const Tensor* p : parameters()) {
        grads.tensors.emplace_back(p->shape());
    }
    return grads;
}

std::pair<Tensor, Tensor> HybridModel::branch_outputs(std::span<const double> x) const {
    ForwardBundle bundle = forward(x, Mode::Infer);
    const std::size_t l_size = config_.lstm_units.back();
    const Tensor& joined = bundle.hidden_cache.input;
    auto [l_vec, f_vec] = concat_backward(joined, l_size);
    return {std::move(l_vec), std::move(f_vec)};
}

int predict(const HybridModel& model, std::span<const double> x, double threshold) {
    return model.forward(x, Mode::Infer).probability >= threshold ? 1 : 0;
}

nlohmann::ordered_json architecture_to_json(const ArchitectureConfig& config) {
    nlohmann::ordered_json j;
    j["input_features"] = config.input_features;
    j["conv_blocks"] = nlohmann::ordered_json::array();
    for (const auto& block : config.conv_blocks) {
        j["conv_blocks"].push_back({{"filters", block.filters},
                                    {"kernel_size", block.kernel_size}});
    }
    j["pool"] = config.pool;
    j["lstm_units"] = config.lstm_units;
    j["dense_units"] = config.dense_units;
    j["dropout_rate"] = config.dropout_rate;
    return j;
}

ArchitectureConfig architecture_from_json(const nlohmann::json& j) {
    ArchitectureConfig config;
    config.input_features = j.at("input_features").get<std::size_t>();
    config.conv_blocks.clear();
    for (const auto& block : j.at("conv_blocks")) {
        config.conv_blocks.push_back({block.at("filters").get<std::size_t>(),
                                      block.at("kernel_size").get<std::size_t>()});
    }
    config.pool = j.at("pool").get<std::size_t>();
    config.lstm_units = j.at("lstm_units").get<std::vector<std::size_t>>();
    config.dense_units = j.at("dense_units").get<std::size_t>();
    config.dropout_rate = j.at("dropout_rate").get<double>();
    return config;
}

void save_model(const HybridModel& model, const std::string& path) {
    nlohmann::ordered_json header;
    header["config"] = architecture_to_json(model.config());
    header["seed"] = model.init_seed();
    header["metadata"] = model.metadata.is_null() ? nlohmann::ordered_json::object()
                                                  : model.metadata;

    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    enumerate_parameters(model, [&](const std::string& name, const Tensor& t) {
        manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += t.size() * sizeof(double);
    });
    header["tensors"] = std::move(manifest);
    header["data_bytes"] = offset;

    const std::string header_text = header.dump();
    std::string blob;
    blob.reserve(20 + header_text.size() + offset);
    blob.append(kMagic, sizeof(kMagic));
    append_u32_le(blob, kFormatVersion);
    append_u64_le(blob, header_text.size());
    blob += header_text;
    enumerate_parameters(model, [&blob](const std::string&, const Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) append_f64_le(blob, t.data()[i]);
    });

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("model: cannot open '" + path + "' for writing");
    }
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) {
        throw DataError("model: write failed for '" + path + "'");
    }
}

HybridModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("model: cannot open '" + path + "'");
    }
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());

    if (raw.size() < 20) {
        throw TruncatedFileError("model: file shorter than the fixed header");
    }
    if (std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0) {
        throw BadMagicError("model: bad magic bytes, not a CLSTMIDS model file");
    }
    const auto version = static_cast<std::uint32_t>(read_u64_le(bytes + 8, 4));
    if (version != kFormatVersion) {
        throw UnsupportedVersionError("model: file version " + std::to_string(version) +
                                      ", this build supports version " +
                                      std::to_string(kFormatVersion));
    }
    const std::uint64_t header_len = read_u64_le(bytes + 12, 8);
    if (raw.size() < 20 + header_len) {
        throw TruncatedFileError("model: file truncated inside the JSON header");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(raw.substr(20, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw ModelLoadError(std::string("model: header is not valid JSON: ") + e.what());
    }

    ArchitectureConfig config;
    std::uint64_t seed = 0;
    try {
        config = architecture_from_json(header.at("config"));
        seed = header.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelLoadError(std::string("model: malformed header fields: ") + e.what());
    }

    HybridModel model(config, seed);
    if (header.contains("metadata")) {
        model.metadata = header.at("metadata");
    }

    const auto& manifest = header.at("tensors");
    const std::vector<std::string> expected_names = model.parameter_names();
    if (manifest.size() != expected_names.size()) {
        throw ShapeMismatchError("model: manifest lists " + std::to_string(manifest.size()) +
                                 " tensors, config implies " +
                                 std::to_string(expected_names.size()));
    }

    const std::uint64_t data_bytes = header.at("data_bytes").get<std::uint64_t>();
    const std::size_t data_start = 20 + header_len;
    if (raw.size() < data_start + data_bytes) {
        throw TruncatedFileError("model: file truncated mid-tensor (expected " +
                                 std::to_string(data_bytes) + " data bytes, found " +
                                 std::to_string(raw.size() - data_start) + ")");
    }

    std::size_t index = 0;
    std::uint64_t expected_offset = 0;
    enumerate_parameters(model, [&](const std::string& name, Tensor& t) {
        const auto& entry = manifest.at(index);
        if (entry.at("name").get<std::string>() != name) {
            throw ShapeMismatchError("model: manifest entry " + std::to_string(index) +
                                     " is '" + entry.at("name").get<std::string>() +
                                     "', expected '" + name + "'");
        }
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != t.shape()) {
            throw ShapeMismatchError("model: tensor '" + name + "' has shape " +
                                     shape_string(shape) + " in file, config implies " +
                                     shape_string(t.shape()));
        }
        if (entry.at("offset").get<std::uint64_t>() != expected_offset) {
            throw ShapeMismatchError("model: tensor '" + name + "' offset mismatch");
        }
        const unsigned char* src = bytes + data_start + expected_offset;
        for (std::size_t i = 0; i < t.size(); ++i) {
            t.data()[i] = parse_f64_le(src + i * sizeof(double));
        }
        expected_offset += t.size() * sizeof(double);
        ++index;
    });
    return model;
}

}  // namespace flowids
