#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "flowids/rng.hpp"
#include "flowids/tensor.hpp"

namespace flowids {

enum class Mode { Train, Infer };
enum class Activation { None, Relu };

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

// 1-D convolution block: cross-correlation (no kernel flip), stride 1,
// valid padding, followed by ReLU.
struct ConvBlockParams {
    Tensor kernels;  // [C_out x K x C_in]
    Tensor bias;     // [C_out]

    std::size_t out_channels() const { return kernels.extent(0); }
    std::size_t kernel_size() const { return kernels.extent(1); }
    std::size_t in_channels() const { return kernels.extent(2); }
    void validate() const;
};

// One LSTM layer; gate order everywhere is i, f, o, c.
struct LstmParams {
    Tensor w_i, u_i, b_i;
    Tensor w_f, u_f, b_f;
    Tensor w_o, u_o, b_o;
    Tensor w_c, u_c, b_c;

    std::size_t hidden_size() const { return w_i.extent(0); }
    std::size_t input_size() const { return w_i.extent(1); }
    void validate() const;
};

struct DenseParams {
    Tensor w;  // [U x V]
    Tensor b;  // [U]

    std::size_t out_size() const { return w.extent(0); }
    std::size_t in_size() const { return w.extent(1); }
    void validate() const;
};

// ---------------------------------------------------------------------------
// Caches: everything the matching backward needs. Single-consumer; running
// backward twice on one cache is a UsageError.
// ---------------------------------------------------------------------------

struct ConvCache {
    Tensor input;           // [L x C_in]
    Tensor pre_activation;  // [L_out x C_out]
    bool consumed = false;
};

struct PoolCache {
    std::vector<std::size_t> shape_in;   // [L x C]
    std::vector<std::size_t> argmax;     // winning input row per output cell
    std::size_t pool = 0;
    bool consumed = false;
};

struct FlattenCache {
    std::vector<std::size_t> shape_in;
    bool consumed = false;
};

struct LstmCache {
    Tensor input;                      // [T x D]
    Tensor h_prev0, c_prev0;           // initial states
    // Per-step activations, each [T x H].
    Tensor gate_i, gate_f, gate_o, gate_c;  // i_t, f_t, o_t, c~_t
    Tensor cell;                       // c_t
    Tensor hidden;                     // h_t
    bool consumed = false;
};

struct DenseCache {
    Tensor input;
    Tensor pre_activation;
    Activation activation = Activation::None;
    bool consumed = false;
};

struct DropoutCache {
    Tensor mask;  // per-element multiplier: 1/(1-m) kept, 0 dropped
    bool consumed = false;
};

// ---------------------------------------------------------------------------
// Gradient bundles
// ---------------------------------------------------------------------------

struct ConvGrads {
    Tensor kernels;
    Tensor bias;
    Tensor input;
};

struct LstmGrads {
    LstmParams params;  // same twelve arrays, holding d/dtheta
    Tensor input;       // [T x D]
};

struct DenseGrads {
    Tensor w;
    Tensor b;
    Tensor input;
};

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

// out[t][c] = ReLU(b[c] + sum_{k,j} x[t+k][j] * kernels[c][k][j]); L >= K.
std::pair<Tensor, ConvCache> conv_block_forward(const Tensor& x, const ConvBlockParams& p);

// Non-overlapping windows of `pool` rows, trailing remainder dropped;
// ties go to the lowest index so backward is deterministic.
std::pair<Tensor, PoolCache> maxpool_forward(const Tensor& h, std::size_t pool);

// Pure reshape to rank 1, row-major (time-step major, channel minor).
std::pair<Tensor, FlattenCache> flatten(const Tensor& p);

struct LstmForwardResult {
    Tensor final_hidden;  // h_T, [H]
    Tensor all_hidden;    // [T x H]
    LstmCache cache;
};

// Zero initial states unless h0/c0 given.
LstmForwardResult lstm_forward(const Tensor& x, const LstmParams& p,
                               const Tensor* h0 = nullptr, const Tensor* c0 = nullptr);

// Rank-1 concatenation, left entries first.
Tensor concat(const Tensor& left, const Tensor& right);

std::pair<Tensor, DenseCache> dense_forward(const Tensor& c, const DenseParams& p,
                                            Activation activation);

// Inverted dropout: in train mode each element is kept with probability 1-m
// and scaled by 1/(1-m); infer mode is the identity.
std::pair<Tensor, DropoutCache> dropout_forward(const Tensor& y, double rate, Mode mode,
                                                Rng& rng);

// ---------------------------------------------------------------------------
// Backward passes (exact analytic gradients)
// ---------------------------------------------------------------------------

ConvGrads conv_block_backward(const ConvBlockParams& p, ConvCache& cache,
                              const Tensor& upstream);

Tensor maxpool_backward(PoolCache& cache, const Tensor& upstream);

Tensor flatten_backward(FlattenCache& cache, const Tensor& upstream);

// upstream_all is [T x H]: the gradient on every hidden step (rows other
// than the consumed steps are zero).
LstmGrads lstm_backward(const LstmParams& p, LstmCache& cache, const Tensor& upstream_all);

// Splits a concat gradient back into its two halves.
std::pair<Tensor, Tensor> concat_backward(const Tensor& upstream, std::size_t left_size);

DenseGrads dense_backward(const DenseParams& p, DenseCache& cache, const Tensor& upstream);

Tensor dropout_backward(DropoutCache& cache, const Tensor& upstream);

}  // namespace flowids
