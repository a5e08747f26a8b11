#pragma once

#include "mvmesh/voxelgrid/grid.hpp"

#include <iosfwd>
#include <string>

namespace mvmesh {

// .voxp: "VOXP", u32 dims[3], f32 origin[3], f32 spacing, then f32
// probabilities, all little-endian, x fastest.
void write_voxp(std::ostream& out, const OccupancyGrid& grid);
OccupancyGrid read_voxp(std::istream& in, const std::string& name = "<stream>");
void save_voxp(const std::string& path, const OccupancyGrid& grid);
OccupancyGrid load_voxp(const std::string& path);

}  // namespace mvmesh
