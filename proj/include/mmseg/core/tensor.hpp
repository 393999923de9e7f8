#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmseg/kernels/kernels.hpp"

namespace mmseg {

// Dense row-major tensor of doubles. Shapes are small (<=5 dims); all math
// routes through the kernels layer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), data_(numel_of(shape_), 0.0) {}
    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numel_of(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    int dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    // this += a * other
    void axpy(double a, const Tensor& other) {
        require_same_shape(other, "axpy");
        kernels::axpy(numel(), a, other.data(), data());
    }
    void scale(double a) { kernels::scale(numel(), a, data()); }

    double sum() const { return kernels::sum(numel(), data()); }

    double mse(const Tensor& other) const {
        require_same_shape(other, "mse");
        if (numel() == 0) return 0.0;
        return kernels::sq_diff_sum(numel(), other.data(), data()) /
               static_cast<double>(numel());
    }

    void require_same_shape(const Tensor& other, const char* what) const {
        if (!same_shape(other))
            throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace mmseg
