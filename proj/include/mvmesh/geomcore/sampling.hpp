#pragma once

#include "mvmesh/geomcore/mesh.hpp"

#include <cstdint>
#include <vector>

namespace mvmesh {

struct PointSample {
  Eigen::Vector3d position;
  Eigen::Vector3d normal;  // unit length
};

/// A surface location as a face plus barycentric weights. Keeping the pick
/// separate from the position lets training re-evaluate samples as a
/// differentiable function of vertex positions.
struct SurfacePick {
  int face = 0;
  Eigen::Vector3d bary;
};

/// Portable uniform double in [0,1) from a 64-bit engine; same stream on every platform.
double uniform01(std::uint64_t bits);

/// Area-weighted uniform picks, deterministic given `seed`.
std::vector<SurfacePick> pick_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

/// Area-weighted uniform samples with face-plane normals.
std::vector<PointSample> sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

std::vector<PointSample> evaluate_picks(const TriangleMesh& mesh, const std::vector<SurfacePick>& picks);

}  // namespace mvmesh
