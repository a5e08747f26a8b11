#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <memory>
#include <vector>

namespace mvmesh {

using Face = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Connectivity shared by every mesh with the same faces. Edges are unique
/// undirected pairs (i<j) in ascending order; neighbor lists are sorted and
/// symmetric.
struct MeshTopology {
  int vertex_count = 0;
  std::vector<Face> faces;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> neighbors;

  /// Validates faces (in range, three distinct indices) and derives E and N(i).
  MeshTopology(int vertex_count, std::vector<Face> faces);
};

/// Triangle mesh in world coordinates (meters).
class TriangleMesh {
 public:
  TriangleMesh();
  TriangleMesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces);

  /// Same connectivity, new positions (the refinement contract).
  TriangleMesh with_vertices(std::vector<Eigen::Vector3d> vertices) const;

  const std::vector<Eigen::Vector3d>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return topology_->faces; }
  const std::vector<Edge>& edges() const { return topology_->edges; }
  const std::vector<int>& neighbors(int i) const { return topology_->neighbors[static_cast<std::size_t>(i)]; }
  const std::shared_ptr<const MeshTopology>& topology() const { return topology_; }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int face_count() const { return static_cast<int>(topology_->faces.size()); }
  bool empty() const { return topology_->faces.empty(); }

  /// Unnormalised (b-a)x(c-a); its norm is twice the face area.
  Eigen::Vector3d face_cross(int f) const;
  double face_area(int f) const { return 0.5 * face_cross(f).norm(); }
  Eigen::Vector3d face_normal(int f) const { return face_cross(f).normalized(); }
  double surface_area() const;

  /// V - E + F.
  int euler_characteristic() const { return vertex_count() - static_cast<int>(edges().size()) + face_count(); }

  /// Vertices as a V x 3 row-major matrix.
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> vertex_matrix() const;

 private:
  TriangleMesh(std::vector<Eigen::Vector3d> vertices, std::shared_ptr<const MeshTopology> topology);

  std::vector<Eigen::Vector3d> vertices_;
  std::shared_ptr<const MeshTopology> topology_;
};

}  // namespace mvmesh
