#pragma once

#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/mesh.hpp"
#include "mvmesh/voxelgrid/grid.hpp"

namespace mvmesh {

class EmptyGridError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Surface of the union of voxels with p >= threshold. Faces between two
/// occupied voxels are dropped, coincident lattice corners are welded, and
/// every boundary quad becomes two triangles whose normals point out of the
/// occupied voxel. Throws EmptyGridError when nothing is occupied.
TriangleMesh cubify(const OccupancyGrid& grid, double threshold = 0.5);

}  // namespace mvmesh
