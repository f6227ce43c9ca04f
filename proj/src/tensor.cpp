#include "flowids/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flowids {

namespace {

std::size_t checked_volume(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw DimensionError("tensor: rank must be 1-3, got rank " +
                             std::to_string(shape.size()));
    }
    std::size_t volume = 1;
    for (std::size_t extent : shape) {
        if (extent == 0) {
            throw DimensionError("tensor: zero extent in shape " + shape_string(shape));
        }
        volume *= extent;
    }
    return volume;
}

void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) {
        throw ParameterError(std::string("tensor: non-finite result in ") + op);
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string("tensor: shape mismatch in ") + op + ": " +
                             shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

template <typename F>
Tensor map_unary(const Tensor& a, F&& f) {
    Tensor out(a.shape());
    const double* src = a.data();
    double* dst = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        dst[i] = f(src[i]);
    }
    return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, F&& f) {
    require_same_shape(a, b, op);
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* dst = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        dst[i] = f(pa[i], pb[i]);
    }
    require_finite(out, op);
    return out;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_volume(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_volume(shape_) != data_.size()) {
        throw DimensionError("tensor: shape " + shape_string(shape_) + " needs " +
                             std::to_string(checked_volume(shape_)) + " values, got " +
                             std::to_string(data_.size()));
    }
    if (!all_finite()) {
        throw ParameterError("tensor: non-finite value in constructor data");
    }
}

Tensor Tensor::from_vector(std::vector<double> values) {
    const std::size_t count = values.size();
    return Tensor({count}, std::move(values));
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (checked_volume(new_shape) != size()) {
        throw DimensionError("tensor: reshape " + shape_string(shape_) + " -> " +
                             shape_string(new_shape) + " changes element count");
    }
    return Tensor(std::move(new_shape), data_);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul: both operands must be rank 2");
    }
    if (a.extent(1) != b.extent(0)) {
        throw DimensionError("matmul: inner extents differ: " + shape_string(a.shape()) +
                             " x " + shape_string(b.shape()));
    }
    const std::size_t m = a.extent(0);
    const std::size_t k = a.extent(1);
    const std::size_t n = b.extent(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a.at(i, t);
            for (std::size_t j = 0; j < n; ++j) {
                c.at(i, j) += av * b.at(t, j);
            }
        }
    }
    require_finite(c, "matmul");
    return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
    return map_binary(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return map_binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return map_binary(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor relu(const Tensor& a) {
    return map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor tanh(const Tensor& a) {
    return map_unary(a, [](double x) { return std::tanh(x); });
}

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) {
    return map_unary(a, [](double x) { return stable_sigmoid(x); });
}

double sum(const Tensor& a) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += a.data()[i];
    }
    return total;
}

double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

double max_value(const Tensor& a) {
    return *std::max_element(a.data(), a.data() + a.size());
}

Tensor rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
    if (!(lo < hi)) {
        throw ParameterError("rand_uniform: requires lo < hi");
    }
    Tensor out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = rng.uniform(lo, hi);
    }
    return out;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace flowids
