#include "flowids/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "flowids/layers.hpp"
#include "flowids/model.hpp"
#include "flowids/optim.hpp"
#include "flowids/rng.hpp"
#include "flowids/tensor.hpp"

namespace flowids {

namespace {

// Central finite difference of `objective` w.r.t. the doubles behind
// `targets`, compared against the matching analytic gradients. Returns
// max|g_a - g_fd| / max(1, max|g_fd|).
double compare_gradients(const std::function<double()>& objective,
                         const std::vector<Tensor*>& targets,
                         const std::vector<const Tensor*>& analytic) {
    double max_diff = 0.0;
    double max_fd = 0.0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
        Tensor& tensor = *targets[t];
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double original = tensor.data()[i];
            const double step = 1e-6 * std::max(1.0, std::abs(original));
            tensor.data()[i] = original + step;
            const double up = objective();
            tensor.data()[i] = original - step;
            const double down = objective();
            tensor.data()[i] = original;
            const double fd = (up - down) / (2.0 * step);
            max_fd = std::max(max_fd, std::abs(fd));
            max_diff = std::max(max_diff, std::abs(analytic[t]->data()[i] - fd));
        }
    }
    return max_diff / std::max(1.0, max_fd);
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -1.0,
                     double hi = 1.0) {
    return rand_uniform(rng, std::move(shape), lo, hi);
}

// objective = sum(output * direction) for a fixed random direction, the
// standard scalarization for layer-level checks.
double dot_all(const Tensor& out, const Tensor& direction) {
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += out.data()[i] * direction.data()[i];
    return acc;
}

double check_conv(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t length = 4 + seed % 5;
    const std::size_t c_in = 1 + seed % 3;
    const std::size_t c_out = 1 + (seed / 3) % 3;
    const std::size_t kernel = 2 + seed % 2;

    Tensor x = random_tensor(rng, {length, c_in});
    ConvBlockParams p{random_tensor(rng, {c_out, kernel, c_in}),
                      random_tensor(rng, {c_out}, -0.5, 0.5)};
    Tensor direction = random_tensor(rng, {length - kernel + 1, c_out});

    auto objective = [&]() {
        auto [out, cache] = conv_block_forward(x, p);
        return dot_all(out, direction);
    };
    auto [out, cache] = conv_block_forward(x, p);
    ConvGrads grads = conv_block_backward(p, cache, direction);

    return compare_gradients(objective, {&x, &p.kernels, &p.bias},
                             {&grads.input, &grads.kernels, &grads.bias});
}

double check_maxpool(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t length = 6 + seed % 5;
    const std::size_t channels = 1 + seed % 3;
    const std::size_t pool = 2 + seed % 2;

    Tensor x = random_tensor(rng, {length, channels});
    Tensor direction = random_tensor(rng, {length / pool, channels});

    auto objective = [&]() {
        auto [out, cache] = maxpool_forward(x, pool);
        return dot_all(out, direction);
    };
    auto [out, cache] = maxpool_forward(x, pool);
    Tensor grad = maxpool_backward(cache, direction);
    return compare_gradients(objective, {&x}, {&grad});
}

double check_flatten(std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = random_tensor(rng, {2 + seed % 4, 1 + seed % 3});
    Tensor direction = random_tensor(rng, {x.size()});

    auto objective = [&]() {
        auto [out, cache] = flatten(x);
        return dot_all(out, direction);
    };
    auto [out, cache] = flatten(x);
    Tensor grad = flatten_backward(cache, direction);
    return compare_gradients(objective, {&x}, {&grad});
}

LstmParams random_lstm(Rng& rng, std::size_t hidden, std::size_t input) {
    LstmParams p;
    p.w_i = random_tensor(rng, {hidden, input});
    p.u_i = random_tensor(rng, {hidden, hidden});
    p.b_i = random_tensor(rng, {hidden}, -0.5, 0.5);
    p.w_f = random_tensor(rng, {hidden, input});
    p.u_f = random_tensor(rng, {hidden, hidden});
    p.b_f = random_tensor(rng, {hidden}, -0.5, 0.5);
    p.w_o = random_tensor(rng, {hidden, input});
    p.u_o = random_tensor(rng, {hidden, hidden});
    p.b_o = random_tensor(rng, {hidden}, -0.5, 0.5);
    p.w_c = random_tensor(rng, {hidden, input});
    p.u_c = random_tensor(rng, {hidden, hidden});
    p.b_c = random_tensor(rng, {hidden}, -0.5, 0.5);
    return p;
}

double check_lstm(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t steps = 2 + seed % 4;
    const std::size_t input = 1 + seed % 3;
    const std::size_t hidden = 2 + (seed / 2) % 3;

    Tensor x = random_tensor(rng, {steps, input});
    LstmParams p = random_lstm(rng, hidden, input);
    Tensor direction = random_tensor(rng, {steps, hidden});

    auto objective = [&]() {
        LstmForwardResult r = lstm_forward(x, p);
        return dot_all(r.all_hidden, direction);
    };
    LstmForwardResult r = lstm_forward(x, p);
    LstmGrads grads = lstm_backward(p, r.cache, direction);

    std::vector<Tensor*> targets = {&x,      &p.w_i, &p.u_i, &p.b_i, &p.w_f, &p.u_f, &p.b_f,
                                    &p.w_o,  &p.u_o, &p.b_o, &p.w_c, &p.u_c, &p.b_c};
    std::vector<const Tensor*> analytic = {
        &grads.input,      &grads.params.w_i, &grads.params.u_i, &grads.params.b_i,
        &grads.params.w_f, &grads.params.u_f, &grads.params.b_f, &grads.params.w_o,
        &grads.params.u_o, &grads.params.b_o, &grads.params.w_c, &grads.params.u_c,
        &grads.params.b_c};
    return compare_gradients(objective, targets, analytic);
}

double check_dense(std::uint64_t seed, Activation activation) {
    Rng rng(seed);
    const std::size_t in_size = 2 + seed % 4;
    const std::size_t out_size = 1 + seed % 4;

    Tensor x = random_tensor(rng, {in_size});
    DenseParams p{random_tensor(rng, {out_size, in_size}),
                  random_tensor(rng, {out_size}, -0.5, 0.5)};
    Tensor direction = random_tensor(rng, {out_size});

    auto objective = [&]() {
        auto [out, cache] = dense_forward(x, p, activation);
        return dot_all(out, direction);
    };
    auto [out, cache] = dense_forward(x, p, activation);
    DenseGrads grads = dense_backward(p, cache, direction);
    return compare_gradients(objective, {&x, &p.w, &p.b},
                             {&grads.input, &grads.w, &grads.b});
}

double check_dropout(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = 4 + seed % 5;
    Tensor x = random_tensor(rng, {n});
    Tensor direction = random_tensor(rng, {n});
    const double rate = 0.4;

    // The mask depends only on the rng stream, so re-seeding per evaluation
    // keeps the finite-difference objective deterministic.
    auto objective = [&]() {
        Rng mask_rng(seed + 1);
        auto [out, cache] = dropout_forward(x, rate, Mode::Train, mask_rng);
        return dot_all(out, direction);
    };
    Rng mask_rng(seed + 1);
    auto [out, cache] = dropout_forward(x, rate, Mode::Train, mask_rng);
    Tensor grad = dropout_backward(cache, direction);
    return compare_gradients(objective, {&x}, {&grad});
}

double check_concat(std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = random_tensor(rng, {1 + seed % 4});
    Tensor b = random_tensor(rng, {1 + (seed / 2) % 4});
    Tensor direction = random_tensor(rng, {a.size() + b.size()});

    auto objective = [&]() { return dot_all(concat(a, b), direction); };
    auto [da, db] = concat_backward(direction, a.size());
    return compare_gradients(objective, {&a, &b}, {&da, &db});
}

// Full model on a tiny two-conv-block architecture (three blocks cannot fit
// an 8-feature input), train-mode dropout active, objective = BCE against a
// fixed label.
double check_end_to_end(std::uint64_t seed) {
    ArchitectureConfig arch;
    arch.input_features = 8;
    arch.conv_blocks = {{2, 2}, {2, 2}};
    arch.pool = 2;
    arch.lstm_units = {2, 3};
    arch.dense_units = 4;
    arch.dropout_rate = 0.4;

    HybridModel model(arch, seed);
    // Zero-initialized biases park ReLU pre-activations exactly on the kink,
    // where central differences are one-sided; jitter every parameter off it.
    Rng jitter(seed + 7);
    for (Tensor* p : model.parameters()) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            p->data()[i] += jitter.uniform(-0.3, 0.3);
        }
    }
    Rng rng(seed + 17);
    std::vector<double> x(arch.input_features);
    for (auto& v : x) v = rng.uniform(0.0, 1.0);
    const int label = static_cast<int>(seed % 2);

    auto objective = [&]() {
        Rng dropout_rng(seed + 29);
        ForwardBundle bundle = model.forward(x, Mode::Train, &dropout_rng);
        const double p[] = {bundle.probability};
        const int y[] = {label};
        return bce_loss(p, y).loss;
    };

    Rng dropout_rng(seed + 29);
    ForwardBundle bundle = model.forward(x, Mode::Train, &dropout_rng);
    GradientSet grads = model.backward(bundle, bundle.probability - label);

    std::vector<Tensor*> targets = model.parameters();
    std::vector<const Tensor*> analytic;
    for (const Tensor& t : grads.tensors) analytic.push_back(&t);
    return compare_gradients(objective, targets, analytic);
}

GradCheckReport run_one(const std::string& name, int seeds, double tolerance,
                        const std::function<double(std::uint64_t)>& check) {
    GradCheckReport report;
    report.layer = name;
    report.configs = seeds;
    for (int s = 0; s < seeds; ++s) {
        report.max_rel_error =
            std::max(report.max_rel_error, check(static_cast<std::uint64_t>(s) + 1));
    }
    report.pass = report.max_rel_error <= tolerance;
    return report;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck(int seeds, double tolerance) {
    std::vector<GradCheckReport> reports;
    reports.push_back(run_one("conv", seeds, tolerance, check_conv));
    reports.push_back(run_one("maxpool", seeds, tolerance, check_maxpool));
    reports.push_back(run_one("flatten", seeds, tolerance, check_flatten));
    reports.push_back(run_one("lstm", seeds, tolerance, check_lstm));
    reports.push_back(run_one("dense_relu", seeds, tolerance, [](std::uint64_t s) {
        return check_dense(s, Activation::Relu);
    }));
    reports.push_back(run_one("dense_linear", seeds, tolerance, [](std::uint64_t s) {
        return check_dense(s, Activation::None);
    }));
    reports.push_back(run_one("dropout", seeds, tolerance, check_dropout));
    reports.push_back(run_one("concat", seeds, tolerance, check_concat));
    reports.push_back(run_one("end_to_end", seeds, tolerance, check_end_to_end));
    return reports;
}

bool all_passed(const std::vector<GradCheckReport>& reports) {
    for (const auto& r : reports) {
        if (!r.pass) return false;
    }
    return true;
}

}  // namespace flowids
