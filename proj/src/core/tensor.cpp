#include "core/tensor.hpp"

#include <cmath>

namespace tb {

size_t Tensor::count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t e : shape) {
        require(e > 0, errc::bad_shape, "zero extent in shape " + shape_string(shape));
        n *= e;
    }
    return n;
}

std::string Tensor::shape_string(const std::vector<size_t>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Tensor::Tensor(std::vector<size_t> shape) : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

Tensor::Tensor(std::vector<size_t> shape, double fill)
    : shape_(std::move(shape)), data_(count(shape_), fill) {}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require(data_.size() == count(shape_), errc::length_mismatch,
            "payload of " + std::to_string(data_.size()) + " values for shape " +
                shape_string(shape_));
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

namespace {

template <typename Op>
Tensor zip(const Tensor& a, const Tensor& b, Op op, const char* what) {
    require(a.same_shape(b), errc::shape_mismatch,
            std::string(what) + " on " + Tensor::shape_string(a.shape()) + " vs " +
                Tensor::shape_string(b.shape()));
    Tensor out(a.shape());
    for (size_t i = 0; i < a.size(); ++i) {
        out[i] = op(a[i], b[i]);
        require(std::isfinite(out[i]), errc::non_finite,
                std::string(what) + " produced a non-finite value at index " + std::to_string(i));
    }
    return out;
}

} // namespace

Tensor tensor_add(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x + y; }, "add");
}
Tensor tensor_sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x - y; }, "sub");
}
Tensor tensor_mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x * y; }, "mul");
}
Tensor tensor_div(const Tensor& a, const Tensor& b) {
    return zip(a, b, [](double x, double y) { return x / y; }, "div");
}

const char* init_name(Init k) {
    return k == Init::glorot_uniform ? "glorot_uniform" : "lecun_normal";
}

Init init_from_name(const std::string& name) {
    if (name == "glorot_uniform") return Init::glorot_uniform;
    if (name == "lecun_normal") return Init::lecun_normal;
    fail(errc::invalid_value, "unknown initializer '" + name + "'");
}

void fan_in_out(const std::vector<size_t>& shape, size_t& fan_in, size_t& fan_out) {
    size_t n = Tensor::count(shape);
    if (shape.size() < 2) {
        fan_in = fan_out = n;
        return;
    }
    size_t receptive = 1;  // product of the spatial axes past the first two
    for (size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
    fan_in = shape[1] * receptive;
    fan_out = shape[0] * receptive;
}

Tensor init_tensor(const std::vector<size_t>& shape, Init kind, Rng& rng) {
    Tensor t(shape);
    size_t fan_in = 0, fan_out = 0;
    fan_in_out(shape, fan_in, fan_out);
    if (kind == Init::glorot_uniform) {
        double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
    } else {
        double sd = std::sqrt(1.0 / static_cast<double>(fan_in));
        for (size_t i = 0; i < t.size(); ++i) t[i] = sd * rng.normal();
    }
    return t;
}

} // namespace tb
