#pragma once

#include "mvmesh/geomcore/mesh.hpp"

#include <optional>

namespace mvmesh {

/// Möller–Trumbore ray/triangle test. Returns the ray parameter t > t_min of
/// the hit; rays parallel to the triangle plane (|det| < 1e-12) miss.
std::optional<double> intersect_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                         const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                         double t_min = 0.0);

/// Parity point-in-mesh test for closed meshes. The probe ray direction is
/// fixed and deliberately off-axis so it does not graze lattice-aligned edges.
bool inside_mesh(const TriangleMesh& mesh, const Eigen::Vector3d& p);

}  // namespace mvmesh
