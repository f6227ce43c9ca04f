#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowids/errors.hpp"
#include "flowids/rng.hpp"

namespace flowids {

// Dense row-major array of doubles, rank 1-3. The carrier for activations,
// parameters and gradients. Treat as immutable once filled; sharing
// read-only across threads is safe.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor from_vector(std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> values() const { return data_; }

    // Row-major indexing: flat index of (i, j) in shape [a, b] is i*b + j.
    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    Tensor reshaped(std::vector<std::size_t> new_shape) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// c[i][j] = sum_t a[i][t] * b[t][j], accumulated in ascending t order.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise ops. Binary ops require identical shapes; no broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Numerically stable scalar sigmoid: separate branches for z >= 0 and z < 0
// so exp never overflows.
double stable_sigmoid(double z);

double sum(const Tensor& a);
double mean(const Tensor& a);
double max_value(const Tensor& a);

// I.i.d. uniform draws in [lo, hi); consumes rng state.
Tensor rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi);

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace flowids
