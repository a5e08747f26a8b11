#pragma once

#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/mesh.hpp"

#include <array>
#include <string>
#include <vector>

namespace mvmesh {

inline constexpr double kProbEpsilon = 1e-6;

enum class GridFrame { CameraLocal, World };

/// Regular lattice: voxel (x,y,z) spans origin + [x,x+1)*spacing per axis.
/// Flat index is x + Dx*(y + Dy*z).
struct GridGeometry {
  std::array<int, 3> dims{1, 1, 1};
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double spacing = 1.0;

  GridGeometry() = default;
  GridGeometry(std::array<int, 3> dims, const Eigen::Vector3d& origin, double spacing);

  /// Cube of `resolution`^3 voxels with edge `extent`, centred on `center`.
  static GridGeometry centered(int resolution, double extent, const Eigen::Vector3d& center);

  int voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  int index(int x, int y, int z) const { return x + dims[0] * (y + dims[1] * z); }
  Eigen::Vector3d voxel_center(int x, int y, int z) const {
    return origin + spacing * Eigen::Vector3d(x + 0.5, y + 0.5, z + 0.5);
  }
  Eigen::Vector3d extent() const { return spacing * Eigen::Vector3d(dims[0], dims[1], dims[2]); }

  bool operator==(const GridGeometry& o) const {
    return dims == o.dims && origin == o.origin && spacing == o.spacing;
  }
  bool operator!=(const GridGeometry& o) const { return !(*this == o); }
};

std::string to_string(const GridGeometry& g);

/// Probabilities p(x), clamped to [eps, 1-eps] at construction.
struct OccupancyGrid {
  GridGeometry geometry;
  GridFrame frame = GridFrame::World;
  std::vector<double> values;

  OccupancyGrid() = default;
  OccupancyGrid(GridGeometry geometry, GridFrame frame, std::vector<double> probabilities);
  OccupancyGrid(GridGeometry geometry, GridFrame frame, double fill);

  double at(int x, int y, int z) const { return values[static_cast<std::size_t>(geometry.index(x, y, z))]; }
  int count_at_least(double threshold) const;
};

/// Log-odds l(x). Grids from to_logodds satisfy |l| <= logit(1-eps); sums of
/// n such grids are bounded by n times that.
struct LogOddsGrid {
  GridGeometry geometry;
  GridFrame frame = GridFrame::World;
  std::vector<double> values;

  double at(int x, int y, int z) const { return values[static_cast<std::size_t>(geometry.index(x, y, z))]; }
};

double clamp_probability(double p);
double logit(double p);
double sigmoid(double l);

LogOddsGrid to_logodds(const OccupancyGrid& g);
/// Voxelwise sum without clamping; composes incrementally.
LogOddsGrid accumulate(const LogOddsGrid& a, const LogOddsGrid& b);
/// Sigmoid then clamp.
OccupancyGrid to_probability(const LogOddsGrid& g);
/// Voxelwise sum of log-odds over views, then sigmoid and clamp. Bit-identical for any view order.
OccupancyGrid merge_views(const std::vector<LogOddsGrid>& grids);

/// Interpolated world-frame log-odds of a camera-local grid. Each target
/// voxel centre is moved into the camera frame and read trilinearly, with
/// lattice indices clamped at the border. Centres outside the local grid's
/// physical extent get l = 0.
LogOddsGrid resample_to_world(const LogOddsGrid& local, const CameraView& cam, const GridGeometry& target);

/// Voxel-centre occupancy of a closed mesh. `grid_to_world` maps grid-frame
/// points to the mesh frame.
OccupancyGrid voxelize(const TriangleMesh& mesh, const GridGeometry& geometry, GridFrame frame,
                       const Eigen::Isometry3d& grid_to_world = Eigen::Isometry3d::Identity());

/// Camera-local grid for a view: cube of `resolution`^3 voxels with edge
/// `extent`, centred on the optical axis at `center_depth`.
GridGeometry local_grid_geometry(int resolution, double extent, double center_depth);

}  // namespace mvmesh
