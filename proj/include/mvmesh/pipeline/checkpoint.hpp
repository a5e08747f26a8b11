#pragma once

#include "mvmesh/diffmath/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace mvmesh {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using TensorMap = std::map<std::string, Tensor<float>>;

// .mvmc: "MVMC", u32 version, u32 count, then per tensor: u32 name length,
// UTF-8 name, u8 rank, u32 dims[rank], f32 data. Little-endian, records in
// name order.
void write_checkpoint(std::ostream& out, const TensorMap& tensors);
/// Throws ValidationError on a version other than kCheckpointVersion.
TensorMap read_checkpoint(std::istream& in, const std::string& name = "<stream>");
void save_checkpoint(const std::string& path, const TensorMap& tensors);
TensorMap load_checkpoint(const std::string& path);

}  // namespace mvmesh
