#include "mvmesh/geomcore/raycast.hpp"

namespace mvmesh {

std::optional<double> intersect_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                         const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                                         double t_min) {
  const Eigen::Vector3d e1 = b - a;
  const Eigen::Vector3d e2 = c - a;
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-12) return std::nullopt;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Eigen::Vector3d q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (t <= t_min) return std::nullopt;
  return t;
}

bool inside_mesh(const TriangleMesh& mesh, const Eigen::Vector3d& p) {
  static const Eigen::Vector3d dir = Eigen::Vector3d(0.8729, 0.3119, 0.3751).normalized();
  int crossings = 0;
  const auto& v = mesh.vertices();
  for (const auto& f : mesh.faces())
    if (intersect_triangle(p, dir, v[f[0]], v[f[1]], v[f[2]])) ++crossings;
  return crossings % 2 == 1;
}

}  // namespace mvmesh
