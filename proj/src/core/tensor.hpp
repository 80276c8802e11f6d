#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace tb {

// Dense row-major tensor of doubles. Shapes are fixed at construction;
// all math in the library runs in double precision.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape);
    Tensor(std::vector<size_t> shape, double fill);
    Tensor(std::vector<size_t> shape, std::vector<double> data);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t size() const { return data_.size(); }
    size_t rank() const { return shape_.size(); }
    size_t extent(size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    // Convenience indexers for up to four axes; row-major strides.
    double& at(size_t i) { return data_.at(i); }
    double& at(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double& at(size_t i, size_t j, size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& at(size_t i, size_t j, size_t k, size_t l) {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at(size_t i) const { return data_.at(i); }
    double at(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }
    double at(size_t i, size_t j, size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(size_t i, size_t j, size_t k, size_t l) const {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double v);

    static size_t count(const std::vector<size_t>& shape);
    static std::string shape_string(const std::vector<size_t>& shape);

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
};

// Checked elementwise arithmetic. Shapes must agree and the result must be
// finite; division by zero therefore surfaces as an error, not as inf.
Tensor tensor_add(const Tensor& a, const Tensor& b);
Tensor tensor_sub(const Tensor& a, const Tensor& b);
Tensor tensor_mul(const Tensor& a, const Tensor& b);
Tensor tensor_div(const Tensor& a, const Tensor& b);

enum class Init { glorot_uniform, lecun_normal };

const char* init_name(Init k);
Init init_from_name(const std::string& name);

// Fan counts for a weight shape: leading axis is the output channel count,
// the rest feed in. For rank < 2 both fans equal the element count.
void fan_in_out(const std::vector<size_t>& shape, size_t& fan_in, size_t& fan_out);

// glorot_uniform: U[-a, a] with a = sqrt(6 / (fan_in + fan_out)).
// lecun_normal:   N(0, sqrt(1 / fan_in)).
Tensor init_tensor(const std::vector<size_t>& shape, Init kind, Rng& rng);

} // namespace tb
