#include "mvmesh/geomcore/primitives.hpp"

#include "mvmesh/error.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace mvmesh {

namespace {

// Flips faces whose normal points toward `inside`; valid for convex solids.
void orient_outward(const std::vector<Eigen::Vector3d>& v, std::vector<Face>& faces, const Eigen::Vector3d& inside) {
  for (Face& f : faces) {
    const Eigen::Vector3d& a = v[static_cast<std::size_t>(f[0])];
    const Eigen::Vector3d& b = v[static_cast<std::size_t>(f[1])];
    const Eigen::Vector3d& c = v[static_cast<std::size_t>(f[2])];
    const Eigen::Vector3d n = (b - a).cross(c - a);
    if (n.dot((a + b + c) / 3.0 - inside) < 0.0) std::swap(f[1], f[2]);
  }
}

}  // namespace

TriangleMesh icosphere(int level, double radius, const Eigen::Vector3d& center) {
  if (level < 0) throw ValidationError("icosphere: level must be >= 0");
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& p : v) p.normalize();
  std::vector<Face> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  orient_outward(v, faces, Eigen::Vector3d::Zero());
  for (auto& p : v) p = center + radius * p;
  return {std::move(v), std::move(faces)};
}

TriangleMesh box(const Eigen::Vector3d& size, const Eigen::Isometry3d& pose) {
  if ((size.array() <= 0.0).any()) throw ValidationError("box: extents must be positive");
  std::vector<Eigen::Vector3d> v;
  for (int i = 0; i < 8; ++i)
    v.emplace_back(((i & 1) ? 0.5 : -0.5) * size.x(), ((i & 2) ? 0.5 : -0.5) * size.y(), ((i & 4) ? 0.5 : -0.5) * size.z());
  // Two triangles per side; corner bit patterns 0..7 = x + 2y + 4z.
  std::vector<Face> faces = {
      {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3},  // -x, +x
      {0, 4, 5}, {0, 5, 1}, {2, 3, 7}, {2, 7, 6},  // -y, +y
      {0, 1, 3}, {0, 3, 2}, {4, 6, 7}, {4, 7, 5},  // -z, +z
  };
  orient_outward(v, faces, Eigen::Vector3d::Zero());
  for (auto& p : v) p = pose * p;
  return {std::move(v), std::move(faces)};
}

TriangleMesh cylinder(double radius, double height, int segments, const Eigen::Isometry3d& pose) {
  if (radius <= 0.0 || height <= 0.0 || segments < 3) throw ValidationError("cylinder: invalid dimensions");
  std::vector<Eigen::Vector3d> v;
  for (int ring = 0; ring < 2; ++ring) {
    const double y = ring == 0 ? -0.5 * height : 0.5 * height;
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      v.emplace_back(radius * std::cos(a), y, radius * std::sin(a));
    }
  }
  const int bottom = static_cast<int>(v.size());
  v.emplace_back(0.0, -0.5 * height, 0.0);
  const int top = static_cast<int>(v.size());
  v.emplace_back(0.0, 0.5 * height, 0.0);
  std::vector<Face> faces;
  for (int s = 0; s < segments; ++s) {
    const int n = (s + 1) % segments;
    faces.push_back({s, n, segments + n});
    faces.push_back({s, segments + n, segments + s});
    faces.push_back({bottom, n, s});
    faces.push_back({top, segments + s, segments + n});
  }
  orient_outward(v, faces, Eigen::Vector3d::Zero());
  for (auto& p : v) p = pose * p;
  return {std::move(v), std::move(faces)};
}

TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts) {
  std::vector<Eigen::Vector3d> v;
  std::vector<Face> faces;
  for (const auto& m : parts) {
    const int base = static_cast<int>(v.size());
    v.insert(v.end(), m.vertices().begin(), m.vertices().end());
    for (const Face& f : m.faces()) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  return {std::move(v), std::move(faces)};
}

TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Isometry3d& pose) {
  std::vector<Eigen::Vector3d> v;
  v.reserve(mesh.vertices().size());
  for (const auto& p : mesh.vertices()) v.push_back(pose * p);
  return mesh.with_vertices(std::move(v));
}

}  // namespace mvmesh
