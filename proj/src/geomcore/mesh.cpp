#include "mvmesh/geomcore/mesh.hpp"

#include "mvmesh/error.hpp"

#include <algorithm>
#include <string>

namespace mvmesh {

MeshTopology::MeshTopology(int vertex_count_in, std::vector<Face> faces_in)
    : vertex_count(vertex_count_in), faces(std::move(faces_in)), neighbors(static_cast<std::size_t>(vertex_count_in)) {
  edges.reserve(faces.size() * 3 / 2 + 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= vertex_count)
        throw ValidationError("mesh: face " + std::to_string(f) + " references vertex " + std::to_string(face[k]) +
                              " outside [0," + std::to_string(vertex_count) + ")");
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw ValidationError("mesh: face " + std::to_string(f) + " is degenerate (repeated vertex index)");
    for (int k = 0; k < 3; ++k) {
      const int a = face[k], b = face[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const Edge& e : edges) {
    neighbors[static_cast<std::size_t>(e[0])].push_back(e[1]);
    neighbors[static_cast<std::size_t>(e[1])].push_back(e[0]);
  }
  for (auto& n : neighbors) std::sort(n.begin(), n.end());
}

TriangleMesh::TriangleMesh() : topology_(std::make_shared<const MeshTopology>(0, std::vector<Face>{})) {}

TriangleMesh::TriangleMesh(std::vector<Eigen::Vector3d> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)),
      topology_(std::make_shared<const MeshTopology>(static_cast<int>(vertices_.size()), std::move(faces))) {}

TriangleMesh::TriangleMesh(std::vector<Eigen::Vector3d> vertices, std::shared_ptr<const MeshTopology> topology)
    : vertices_(std::move(vertices)), topology_(std::move(topology)) {}

TriangleMesh TriangleMesh::with_vertices(std::vector<Eigen::Vector3d> vertices) const {
  if (static_cast<int>(vertices.size()) != topology_->vertex_count)
    throw ValidationError("mesh: with_vertices got " + std::to_string(vertices.size()) + " vertices, topology has " +
                          std::to_string(topology_->vertex_count));
  return TriangleMesh(std::move(vertices), topology_);
}

Eigen::Vector3d TriangleMesh::face_cross(int f) const {
  const Face& face = topology_->faces[static_cast<std::size_t>(f)];
  const Eigen::Vector3d& a = vertices_[static_cast<std::size_t>(face[0])];
  const Eigen::Vector3d& b = vertices_[static_cast<std::size_t>(face[1])];
  const Eigen::Vector3d& c = vertices_[static_cast<std::size_t>(face[2])];
  return (b - a).cross(c - a);
}

double TriangleMesh::surface_area() const {
  double area = 0.0;
  for (int f = 0; f < face_count(); ++f) area += face_area(f);
  return area;
}

Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> TriangleMesh::vertex_matrix() const {
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> m(vertex_count(), 3);
  for (int i = 0; i < vertex_count(); ++i) m.row(i) = vertices_[static_cast<std::size_t>(i)].transpose();
  return m;
}

}  // namespace mvmesh
