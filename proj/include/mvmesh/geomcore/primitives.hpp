#pragma once

#include "mvmesh/geomcore/mesh.hpp"

#include <Eigen/Geometry>

namespace mvmesh {

/// Geodesic sphere from a subdivided icosahedron; level 0 has 12 vertices.
TriangleMesh icosphere(int level, double radius = 1.0, const Eigen::Vector3d& center = Eigen::Vector3d::Zero());

/// Axis-aligned box of full extents `size` centered at the origin, then posed.
TriangleMesh box(const Eigen::Vector3d& size, const Eigen::Isometry3d& pose = Eigen::Isometry3d::Identity());

/// Closed cylinder along local y with capped ends.
TriangleMesh cylinder(double radius, double height, int segments,
                      const Eigen::Isometry3d& pose = Eigen::Isometry3d::Identity());

/// Concatenates meshes into one (disjoint components, no welding).
TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts);

/// Applies a rigid transform to every vertex.
TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Isometry3d& pose);

}  // namespace mvmesh
