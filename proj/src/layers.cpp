#include "flowids/layers.hpp"

#include <cmath>
#include <string>

#include "flowids/errors.hpp"

namespace flowids {

namespace {

void consume(bool& flag, const char* layer) {
    if (flag) {
        throw UsageError(std::string(layer) + ": cache already consumed by a backward pass");
    }
    flag = true;
}

void require_upstream_shape(const Tensor& upstream, const std::vector<std::size_t>& expected,
                            const char* layer) {
    if (upstream.shape() != expected) {
        throw DimensionError(std::string(layer) + ": upstream shape " +
                             shape_string(upstream.shape()) + " does not match output shape " +
                             shape_string(expected));
    }
}

}  // namespace

void ConvBlockParams::validate() const {
    if (kernels.rank() != 3) {
        throw DimensionError("conv: kernels must be [C_out x K x C_in]");
    }
    if (bias.rank() != 1 || bias.extent(0) != out_channels()) {
        throw DimensionError("conv: bias extent must equal filter count");
    }
}

void LstmParams::validate() const {
    const std::size_t h = hidden_size();
    const std::size_t d = input_size();
    const Tensor* ws[] = {&w_i, &w_f, &w_o, &w_c};
    const Tensor* us[] = {&u_i, &u_f, &u_o, &u_c};
    const Tensor* bs[] = {&b_i, &b_f, &b_o, &b_c};
    for (int g = 0; g < 4; ++g) {
        if (ws[g]->rank() != 2 || ws[g]->extent(0) != h || ws[g]->extent(1) != d ||
            us[g]->rank() != 2 || us[g]->extent(0) != h || us[g]->extent(1) != h ||
            bs[g]->rank() != 1 || bs[g]->extent(0) != h) {
            throw DimensionError("lstm: inconsistent gate parameter shapes");
        }
    }
}

void DenseParams::validate() const {
    if (w.rank() != 2 || b.rank() != 1 || b.extent(0) != out_size()) {
        throw DimensionError("dense: weights must be [U x V] with bias [U]");
    }
}

// ---------------------------------------------------------------------------
// Convolution block
// ---------------------------------------------------------------------------

std::pair<Tensor, ConvCache> conv_block_forward(const Tensor& x, const ConvBlockParams& p) {
    p.validate();
    if (x.rank() != 2 || x.extent(1) != p.in_channels()) {
        throw DimensionError("conv: input must be [L x C_in], got " +
                             shape_string(x.shape()));
    }
    const std::size_t length = x.extent(0);
    const std::size_t k_size = p.kernel_size();
    if (length < k_size) {
        throw DimensionError("conv: input length " + std::to_string(length) +
                             " shorter than kernel size " + std::to_string(k_size));
    }
    const std::size_t c_in = p.in_channels();
    const std::size_t c_out = p.out_channels();
    const std::size_t out_len = length - k_size + 1;

    Tensor pre({out_len, c_out});
    for (std::size_t t = 0; t < out_len; ++t) {
        for (std::size_t c = 0; c < c_out; ++c) {
            double acc = p.bias.at(c);
            for (std::size_t k = 0; k < k_size; ++k) {
                for (std::size_t j = 0; j < c_in; ++j) {
                    acc += x.at(t + k, j) * p.kernels.at(c, k, j);
                }
            }
            pre.at(t, c) = acc;
        }
    }
    Tensor out = relu(pre);
    ConvCache cache{x, std::move(pre)};
    return {std::move(out), std::move(cache)};
}

ConvGrads conv_block_backward(const ConvBlockParams& p, ConvCache& cache,
                              const Tensor& upstream) {
    consume(cache.consumed, "conv");
    require_upstream_shape(upstream, cache.pre_activation.shape(), "conv");

    const std::size_t out_len = upstream.extent(0);
    const std::size_t c_out = p.out_channels();
    const std::size_t k_size = p.kernel_size();
    const std::size_t c_in = p.in_channels();

    ConvGrads grads{Tensor(p.kernels.shape()), Tensor(p.bias.shape()),
                    Tensor(cache.input.shape())};
    for (std::size_t t = 0; t < out_len; ++t) {
        for (std::size_t c = 0; c < c_out; ++c) {
            if (cache.pre_activation.at(t, c) <= 0.0) continue;  // ReLU gate
            const double g = upstream.at(t, c);
            grads.bias.at(c) += g;
            for (std::size_t k = 0; k < k_size; ++k) {
                for (std::size_t j = 0; j < c_in; ++j) {
                    grads.kernels.at(c, k, j) += g * cache.input.at(t + k, j);
                    grads.input.at(t + k, j) += g * p.kernels.at(c, k, j);
                }
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

std::pair<Tensor, PoolCache> maxpool_forward(const Tensor& h, std::size_t pool) {
    if (pool < 2) {
        throw ParameterError("maxpool: pool extent must be >= 2");
    }
    if (h.rank() != 2) {
        throw DimensionError("maxpool: input must be [L x C]");
    }
    const std::size_t length = h.extent(0);
    const std::size_t channels = h.extent(1);
    if (length < pool) {
        throw DimensionError("maxpool: input length " + std::to_string(length) +
                             " shorter than pool extent " + std::to_string(pool));
    }
    const std::size_t out_len = length / pool;  // trailing remainder dropped

    Tensor out({out_len, channels});
    PoolCache cache;
    cache.shape_in = h.shape();
    cache.pool = pool;
    cache.argmax.resize(out_len * channels);
    for (std::size_t t = 0; t < out_len; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            std::size_t best_row = t * pool;
            double best = h.at(best_row, c);
            for (std::size_t k = 1; k < pool; ++k) {
                const double v = h.at(t * pool + k, c);
                if (v > best) {  // first maximum wins ties
                    best = v;
                    best_row = t * pool + k;
                }
            }
            out.at(t, c) = best;
            cache.argmax[t * channels + c] = best_row * channels + c;
        }
    }
    return {std::move(out), std::move(cache)};
}

Tensor maxpool_backward(PoolCache& cache, const Tensor& upstream) {
    consume(cache.consumed, "maxpool");
    const std::size_t out_len = cache.shape_in[0] / cache.pool;
    require_upstream_shape(upstream, {out_len, cache.shape_in[1]}, "maxpool");

    Tensor grad(cache.shape_in);
    for (std::size_t i = 0; i < cache.argmax.size(); ++i) {
        grad.at(cache.argmax[i]) += upstream.at(i);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Flatten
// ---------------------------------------------------------------------------

std::pair<Tensor, FlattenCache> flatten(const Tensor& p) {
    FlattenCache cache;
    cache.shape_in = p.shape();
    return {p.reshaped({p.size()}), std::move(cache)};
}

Tensor flatten_backward(FlattenCache& cache, const Tensor& upstream) {
    consume(cache.consumed, "flatten");
    std::size_t volume = 1;
    for (std::size_t e : cache.shape_in) volume *= e;
    require_upstream_shape(upstream, {volume}, "flatten");
    return upstream.reshaped(cache.shape_in);
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

LstmForwardResult lstm_forward(const Tensor& x, const LstmParams& p, const Tensor* h0,
                               const Tensor* c0) {
    p.validate();
    if (x.rank() != 2 || x.extent(1) != p.input_size()) {
        throw DimensionError("lstm: input must be [T x D] with D = " +
                             std::to_string(p.input_size()) + ", got " +
                             shape_string(x.shape()));
    }
    const std::size_t steps = x.extent(0);
    const std::size_t hidden = p.hidden_size();
    const std::size_t input = p.input_size();

    LstmCache cache;
    cache.input = x;
    cache.h_prev0 = h0 ? *h0 : Tensor({hidden});
    cache.c_prev0 = c0 ? *c0 : Tensor({hidden});
    if (cache.h_prev0.shape() != std::vector<std::size_t>{hidden} ||
        cache.c_prev0.shape() != std::vector<std::size_t>{hidden}) {
        throw DimensionError("lstm: initial states must be [H]");
    }
    cache.gate_i = Tensor({steps, hidden});
    cache.gate_f = Tensor({steps, hidden});
    cache.gate_o = Tensor({steps, hidden});
    cache.gate_c = Tensor({steps, hidden});
    cache.cell = Tensor({steps, hidden});
    cache.hidden = Tensor({steps, hidden});

    const Tensor* ws[] = {&p.w_i, &p.w_f, &p.w_o, &p.w_c};
    const Tensor* us[] = {&p.u_i, &p.u_f, &p.u_o, &p.u_c};
    const Tensor* bs[] = {&p.b_i, &p.b_f, &p.b_o, &p.b_c};
    Tensor* gates[] = {&cache.gate_i, &cache.gate_f, &cache.gate_o, &cache.gate_c};

    std::vector<double> pre(hidden);
    for (std::size_t t = 0; t < steps; ++t) {
        const double* x_t = x.data() + t * input;
        const double* h_prev =
            t == 0 ? cache.h_prev0.data() : cache.hidden.data() + (t - 1) * hidden;
        const double* c_prev =
            t == 0 ? cache.c_prev0.data() : cache.cell.data() + (t - 1) * hidden;

        for (int g = 0; g < 4; ++g) {
            const double* w = ws[g]->data();
            const double* u = us[g]->data();
            const double* b = bs[g]->data();
            double* out = gates[g]->data() + t * hidden;
            for (std::size_t row = 0; row < hidden; ++row) {
                double acc = b[row];
                const double* w_row = w + row * input;
                for (std::size_t d = 0; d < input; ++d) acc += w_row[d] * x_t[d];
                const double* u_row = u + row * hidden;
                for (std::size_t v = 0; v < hidden; ++v) acc += u_row[v] * h_prev[v];
                pre[row] = acc;
            }
            if (g == 3) {
                for (std::size_t row = 0; row < hidden; ++row) out[row] = std::tanh(pre[row]);
            } else {
                for (std::size_t row = 0; row < hidden; ++row) {
                    out[row] = stable_sigmoid(pre[row]);
                }
            }
        }

        double* c_t = cache.cell.data() + t * hidden;
        double* h_t = cache.hidden.data() + t * hidden;
        const double* i_t = cache.gate_i.data() + t * hidden;
        const double* f_t = cache.gate_f.data() + t * hidden;
        const double* o_t = cache.gate_o.data() + t * hidden;
        const double* cand = cache.gate_c.data() + t * hidden;
        for (std::size_t row = 0; row < hidden; ++row) {
            c_t[row] = f_t[row] * c_prev[row] + i_t[row] * cand[row];
            h_t[row] = o_t[row] * std::tanh(c_t[row]);
        }
    }

    Tensor final_hidden({hidden});
    for (std::size_t row = 0; row < hidden; ++row) {
        final_hidden.at(row) = cache.hidden.at(steps - 1, row);
    }
    Tensor all_hidden = cache.hidden;
    return {std::move(final_hidden), std::move(all_hidden), std::move(cache)};
}

LstmGrads lstm_backward(const LstmParams& p, LstmCache& cache, const Tensor& upstream_all) {
    consume(cache.consumed, "lstm");
    require_upstream_shape(upstream_all, cache.hidden.shape(), "lstm");

    const std::size_t steps = cache.input.extent(0);
    const std::size_t input = cache.input.extent(1);
    const std::size_t hidden = p.hidden_size();

    LstmGrads grads;
    grads.params.w_i = Tensor(p.w_i.shape());
    grads.params.u_i = Tensor(p.u_i.shape());
    grads.params.b_i = Tensor(p.b_i.shape());
    grads.params.w_f = Tensor(p.w_f.shape());
    grads.params.u_f = Tensor(p.u_f.shape());
    grads.params.b_f = Tensor(p.b_f.shape());
    grads.params.w_o = Tensor(p.w_o.shape());
    grads.params.u_o = Tensor(p.u_o.shape());
    grads.params.b_o = Tensor(p.b_o.shape());
    grads.params.w_c = Tensor(p.w_c.shape());
    grads.params.u_c = Tensor(p.u_c.shape());
    grads.params.b_c = Tensor(p.b_c.shape());
    grads.input = Tensor(cache.input.shape());

    const Tensor* ws[] = {&p.w_i, &p.w_f, &p.w_o, &p.w_c};
    const Tensor* us[] = {&p.u_i, &p.u_f, &p.u_o, &p.u_c};
    Tensor* dws[] = {&grads.params.w_i, &grads.params.w_f, &grads.params.w_o,
                     &grads.params.w_c};
    Tensor* dus[] = {&grads.params.u_i, &grads.params.u_f, &grads.params.u_o,
                     &grads.params.u_c};
    Tensor* dbs[] = {&grads.params.b_i, &grads.params.b_f, &grads.params.b_o,
                     &grads.params.b_c};

    std::vector<double> dh_next(hidden, 0.0);
    std::vector<double> dc_next(hidden, 0.0);
    std::vector<double> da(4 * hidden);

    for (std::size_t t = steps; t-- > 0;) {
        const double* i_t = cache.gate_i.data() + t * hidden;
        const double* f_t = cache.gate_f.data() + t * hidden;
        const double* o_t = cache.gate_o.data() + t * hidden;
        const double* cand = cache.gate_c.data() + t * hidden;
        const double* c_t = cache.cell.data() + t * hidden;
        const double* c_prev =
            t == 0 ? cache.c_prev0.data() : cache.cell.data() + (t - 1) * hidden;
        const double* h_prev =
            t == 0 ? cache.h_prev0.data() : cache.hidden.data() + (t - 1) * hidden;
        const double* x_t = cache.input.data() + t * input;

        for (std::size_t row = 0; row < hidden; ++row) {
            const double dh = upstream_all.at(t, row) + dh_next[row];
            const double tanh_c = std::tanh(c_t[row]);
            const double d_o = dh * tanh_c;
            const double dc = dc_next[row] + dh * o_t[row] * (1.0 - tanh_c * tanh_c);
            const double d_cand = dc * i_t[row];
            const double d_i = dc * cand[row];
            const double d_f = dc * c_prev[row];
            dc_next[row] = dc * f_t[row];

            da[0 * hidden + row] = d_i * i_t[row] * (1.0 - i_t[row]);
            da[1 * hidden + row] = d_f * f_t[row] * (1.0 - f_t[row]);
            da[2 * hidden + row] = d_o * o_t[row] * (1.0 - o_t[row]);
            da[3 * hidden + row] = d_cand * (1.0 - cand[row] * cand[row]);
        }

        double* dx_t = grads.input.data() + t * input;
        for (std::size_t row = 0; row < hidden; ++row) dh_next[row] = 0.0;
        for (int g = 0; g < 4; ++g) {
            const double* da_g = da.data() + g * hidden;
            const double* w = ws[g]->data();
            const double* u = us[g]->data();
            double* dw = dws[g]->data();
            double* du = dus[g]->data();
            double* db = dbs[g]->data();
            for (std::size_t row = 0; row < hidden; ++row) {
                const double a = da_g[row];
                if (a == 0.0) continue;
                db[row] += a;
                double* dw_row = dw + row * input;
                const double* w_row = w + row * input;
                for (std::size_t d = 0; d < input; ++d) {
                    dw_row[d] += a * x_t[d];
                    dx_t[d] += a * w_row[d];
                }
                double* du_row = du + row * hidden;
                const double* u_row = u + row * hidden;
                for (std::size_t v = 0; v < hidden; ++v) {
                    du_row[v] += a * h_prev[v];
                    dh_next[v] += a * u_row[v];
                }
            }
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Concat / dense / dropout
// ---------------------------------------------------------------------------

Tensor concat(const Tensor& left, const Tensor& right) {
    if (left.rank() > 1 || right.rank() > 1) {
        throw DimensionError("concat: both operands must be rank 1");
    }
    std::vector<double> joined;
    joined.reserve(left.size() + right.size());
    joined.insert(joined.end(), left.data(), left.data() + left.size());
    joined.insert(joined.end(), right.data(), right.data() + right.size());
    return Tensor::from_vector(std::move(joined));
}

std::pair<Tensor, Tensor> concat_backward(const Tensor& upstream, std::size_t left_size) {
    if (upstream.rank() != 1 || upstream.size() < left_size) {
        throw DimensionError("concat: upstream shorter than the left operand");
    }
    std::vector<double> left(upstream.data(), upstream.data() + left_size);
    std::vector<double> right(upstream.data() + left_size, upstream.data() + upstream.size());
    return {Tensor::from_vector(std::move(left)), Tensor::from_vector(std::move(right))};
}

std::pair<Tensor, DenseCache> dense_forward(const Tensor& c, const DenseParams& p,
                                            Activation activation) {
    p.validate();
    if (c.rank() != 1 || c.extent(0) != p.in_size()) {
        throw DimensionError("dense: input must be [" + std::to_string(p.in_size()) +
                             "], got " + shape_string(c.shape()));
    }
    const std::size_t out_size = p.out_size();
    const std::size_t in_size = p.in_size();
    Tensor pre({out_size});
    for (std::size_t u = 0; u < out_size; ++u) {
        double acc = p.b.at(u);
        const double* w_row = p.w.data() + u * in_size;
        for (std::size_t v = 0; v < in_size; ++v) acc += w_row[v] * c.at(v);
        pre.at(u) = acc;
    }
    Tensor out = activation == Activation::Relu ? relu(pre) : pre;
    DenseCache cache{c, std::move(pre), activation};
    return {std::move(out), std::move(cache)};
}

DenseGrads dense_backward(const DenseParams& p, DenseCache& cache, const Tensor& upstream) {
    consume(cache.consumed, "dense");
    require_upstream_shape(upstream, cache.pre_activation.shape(), "dense");

    const std::size_t out_size = p.out_size();
    const std::size_t in_size = p.in_size();
    DenseGrads grads{Tensor(p.w.shape()), Tensor(p.b.shape()), Tensor(cache.input.shape())};
    for (std::size_t u = 0; u < out_size; ++u) {
        double dpre = upstream.at(u);
        if (cache.activation == Activation::Relu && cache.pre_activation.at(u) <= 0.0) {
            dpre = 0.0;
        }
        if (dpre == 0.0) continue;
        grads.b.at(u) = dpre;
        double* dw_row = grads.w.data() + u * in_size;
        const double* w_row = p.w.data() + u * in_size;
        for (std::size_t v = 0; v < in_size; ++v) {
            dw_row[v] = dpre * cache.input.at(v);
            grads.input.at(v) += dpre * w_row[v];
        }
    }
    return grads;
}

std::pair<Tensor, DropoutCache> dropout_forward(const Tensor& y, double rate, Mode mode,
                                                Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ParameterError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    DropoutCache cache;
    cache.mask = Tensor(y.shape());
    Tensor out(y.shape());
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double m = 1.0;
        if (mode == Mode::Train) {
            m = rng.uniform() >= rate ? scale : 0.0;
        }
        cache.mask.data()[i] = m;
        out.data()[i] = y.data()[i] * m;
    }
    return {std::move(out), std::move(cache)};
}

Tensor dropout_backward(DropoutCache& cache, const Tensor& upstream) {
    consume(cache.consumed, "dropout");
    require_upstream_shape(upstream, cache.mask.shape(), "dropout");
    return mul(upstream, cache.mask);
}

}  // namespace flowids
