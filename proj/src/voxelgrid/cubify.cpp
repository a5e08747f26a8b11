#include "mvmesh/voxelgrid/cubify.hpp"

#include <map>

namespace mvmesh {

TriangleMesh cubify(const OccupancyGrid& grid, double threshold) {
  const GridGeometry& g = grid.geometry;
  const auto& d = g.dims;
  auto occupied = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) return false;
    return grid.at(x, y, z) >= threshold;
  };

  std::vector<Eigen::Vector3d> vertices;
  std::vector<Face> faces;
  std::map<std::array<int, 3>, int> weld;
  auto vertex = [&](const std::array<int, 3>& lp) {
    auto [it, inserted] = weld.try_emplace(lp, static_cast<int>(vertices.size()));
    if (inserted) vertices.push_back(g.origin + g.spacing * Eigen::Vector3d(lp[0], lp[1], lp[2]));
    return it->second;
  };

  // In-plane axes (u,v) per face normal axis, chosen so e_u x e_v = e_axis.
  static constexpr int kU[3] = {1, 2, 0};
  static constexpr int kV[3] = {2, 0, 1};

  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        if (!occupied(x, y, z)) continue;
        const std::array<int, 3> cell{x, y, z};
        for (int axis = 0; axis < 3; ++axis)
          for (int sign : {-1, 1}) {
            std::array<int, 3> nb = cell;
            nb[axis] += sign;
            if (occupied(nb[0], nb[1], nb[2])) continue;
            std::array<int, 3> base = cell;
            if (sign > 0) base[axis] += 1;
            std::array<std::array<int, 3>, 4> corners{base, base, base, base};
            corners[1][kU[axis]] += 1;
            corners[2][kU[axis]] += 1;
            corners[2][kV[axis]] += 1;
            corners[3][kV[axis]] += 1;
            if (sign < 0) std::swap(corners[1], corners[3]);
            const int c0 = vertex(corners[0]), c1 = vertex(corners[1]), c2 = vertex(corners[2]),
                      c3 = vertex(corners[3]);
            faces.push_back({c0, c1, c2});
            faces.push_back({c0, c2, c3});
          }
      }
  if (faces.empty()) throw EmptyGridError("cubify: no voxel reaches the occupancy threshold");
  return TriangleMesh(std::move(vertices), std::move(faces));
}

}  // namespace mvmesh
