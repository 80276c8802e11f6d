#pragma once

#include <string>
#include <vector>

#include "core/optim.hpp"
#include "core/params.hpp"

namespace tb {

// Little-endian tensor container:
//
//   "TBCK"  u32 version=1  u64 tensor_count
//   repeated: u32 name_len, name bytes,
//             u32 rank, u64 extent[rank],
//             f64 payload[product(extents)]
//
// Doubles travel as raw IEEE-754 bits, so values round-trip exactly.
struct NamedTensor {
    std::string name;
    Tensor value;
};

void write_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_file(const std::string& path);

void save_params(const std::string& path, const ParamSet& w);
// Restores into a set with the expected layout; names and shapes must match.
void load_params(const std::string& path, ParamSet& w);

void save_optimizer_state(const std::string& path, const OptimizerState& st);
void load_optimizer_state(const std::string& path, OptimizerState& st);

} // namespace tb
