#include "mvmesh/pipeline/checkpoint.hpp"

#include "mvmesh/binary_io.hpp"

#include <fstream>

namespace mvmesh {

void write_checkpoint(std::ostream& out, const TensorMap& tensors) {
  binio::put_magic(out, "MVMC");
  binio::put_u32(out, kCheckpointVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    binio::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (Index d : t.shape()) binio::put_u32(out, static_cast<std::uint32_t>(d));
    for (Index i = 0; i < t.size(); ++i) binio::put_f32(out, t[i]);
  }
}

TensorMap read_checkpoint(std::istream& in, const std::string& name) {
  binio::Reader r(in, name);
  r.magic("MVMC");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    r.fail("incompatible checkpoint schema version " + std::to_string(version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t count = r.u32("count");
  TensorMap out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = r.u32("name length");
    if (len == 0 || len > 4096) r.fail("tensor name length out of range");
    std::string key = r.str(len, "name");
    const std::uint8_t rank = r.u8("rank");
    if (rank > 8) r.fail("tensor rank above 8");
    Shape shape;
    std::uint64_t total = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint32_t n = r.u32("dims");
      total *= n;
      if (total > (1ULL << 28)) r.fail("tensor " + key + " is too large");
      shape.push_back(static_cast<Index>(n));
    }
    Tensor<float> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = r.f32("data");
    if (!out.emplace(key, std::move(t)).second) r.fail("duplicate tensor " + key);
  }
  r.expect_end();
  return out;
}

void save_checkpoint(const std::string& path, const TensorMap& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_checkpoint(out, tensors);
}

TensorMap load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  return read_checkpoint(in, path);
}

}  // namespace mvmesh
