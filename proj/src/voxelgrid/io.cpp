#include "mvmesh/voxelgrid/io.hpp"

#include "mvmesh/binary_io.hpp"

#include <fstream>

namespace mvmesh {

void write_voxp(std::ostream& out, const OccupancyGrid& grid) {
  const GridGeometry& g = grid.geometry;
  binio::put_magic(out, "VOXP");
  for (int k = 0; k < 3; ++k) binio::put_u32(out, static_cast<std::uint32_t>(g.dims[k]));
  for (int k = 0; k < 3; ++k) binio::put_f32(out, static_cast<float>(g.origin[k]));
  binio::put_f32(out, static_cast<float>(g.spacing));
  for (double p : grid.values) binio::put_f32(out, static_cast<float>(p));
}

OccupancyGrid read_voxp(std::istream& in, const std::string& name) {
  binio::Reader r(in, name);
  r.magic("VOXP");
  std::array<int, 3> dims{};
  for (int k = 0; k < 3; ++k) {
    const std::uint32_t v = r.u32("dims");
    if (v == 0 || v > 4096) r.fail("grid dimension " + std::to_string(v) + " out of range");
    dims[k] = static_cast<int>(v);
  }
  Eigen::Vector3d origin;
  for (int k = 0; k < 3; ++k) origin[k] = r.f32("origin");
  const double spacing = r.f32("spacing");
  GridGeometry geometry(dims, origin, spacing);
  std::vector<double> values(static_cast<std::size_t>(geometry.voxel_count()));
  for (double& v : values) {
    v = r.f32("values");
    if (!(v >= 0.0 && v <= 1.0)) r.fail("probability outside [0,1]");
  }
  r.expect_end();
  return OccupancyGrid(geometry, GridFrame::World, std::move(values));
}

void save_voxp(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_voxp(out, grid);
}

OccupancyGrid load_voxp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return read_voxp(in, path);
}

}  // namespace mvmesh
