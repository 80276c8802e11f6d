#include "core/params.hpp"

namespace tb {

void ParamSet::add(std::string name, Tensor value) {
    require(!has(name), errc::invalid_value, "duplicate parameter name '" + name + "'");
    entries_.push_back({std::move(name), std::move(value)});
}

size_t ParamSet::total_size() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

Tensor& ParamSet::find(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return e.value;
    fail(errc::invalid_value, "no parameter named '" + name + "'");
}

const Tensor& ParamSet::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.value;
    fail(errc::invalid_value, "no parameter named '" + name + "'");
}

bool ParamSet::same_layout(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name != other.entries_[i].name) return false;
        if (entries_[i].value.shape() != other.entries_[i].value.shape()) return false;
    }
    return true;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet z;
    for (const auto& e : entries_) z.add(e.name, Tensor(e.value.shape()));
    return z;
}

std::vector<double> flatten_params(const ParamSet& params) {
    std::vector<double> flat;
    flat.reserve(params.total_size());
    for (const auto& e : params) flat.insert(flat.end(), e.value.data(), e.value.data() + e.value.size());
    return flat;
}

void unflatten_params(const std::vector<double>& flat, ParamSet& into) {
    require(flat.size() == into.total_size(), errc::length_mismatch,
            "flat vector of " + std::to_string(flat.size()) + " values for a layout holding " +
                std::to_string(into.total_size()));
    size_t off = 0;
    for (auto& e : into) {
        for (size_t i = 0; i < e.value.size(); ++i) e.value[i] = flat[off + i];
        off += e.value.size();
    }
}

} // namespace tb
