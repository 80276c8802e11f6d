#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace tb {

// Ordered collection of named weight tensors. Order is fixed by whoever
// builds the set (the network builder lists its layers front to back) and
// the flat view below always follows it, so a flat vector written by one
// component can be unflattened by any other.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
    };

    void add(std::string name, Tensor value);
    size_t count() const { return entries_.size(); }
    size_t total_size() const;

    Entry& entry(size_t i) { return entries_[i]; }
    const Entry& entry(size_t i) const { return entries_[i]; }
    Tensor& operator[](size_t i) { return entries_[i].value; }
    const Tensor& operator[](size_t i) const { return entries_[i].value; }

    bool has(const std::string& name) const;
    Tensor& find(const std::string& name);
    const Tensor& find(const std::string& name) const;

    // Same entry names and shapes, values ignored.
    bool same_layout(const ParamSet& other) const;

    // Zero-filled copy of the layout; handy for gradient accumulators.
    ParamSet zeros_like() const;

    std::vector<Entry>::iterator begin() { return entries_.begin(); }
    std::vector<Entry>::iterator end() { return entries_.end(); }
    std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
    std::vector<Entry>::const_iterator end() const { return entries_.end(); }

private:
    std::vector<Entry> entries_;
};

// Concatenates every entry in order into one flat vector.
std::vector<double> flatten_params(const ParamSet& params);

// Writes a flat vector back into the entries of `into`, which supplies the
// layout. Lengths must match exactly.
void unflatten_params(const std::vector<double>& flat, ParamSet& into);

} // namespace tb
