#include "mvmesh/geomcore/sampling.hpp"

#include "mvmesh/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mvmesh {

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::vector<SurfacePick> pick_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
  std::vector<double> cumulative(static_cast<std::size_t>(mesh.face_count()));
  double total = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    total += mesh.face_area(f);
    cumulative[static_cast<std::size_t>(f)] = total;
  }
  if (!(total > 0.0)) throw ValidationError("sample_surface: mesh has no face with positive area");

  std::mt19937_64 rng(seed);
  std::vector<SurfacePick> picks;
  picks.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const double target = uniform01(rng()) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    int face = static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), mesh.face_count() - 1));
    // Skip zero-area faces that upper_bound can land on through equal prefix sums.
    while (mesh.face_area(face) <= 0.0 && face + 1 < mesh.face_count()) ++face;
    const double r1 = std::sqrt(uniform01(rng()));
    const double r2 = uniform01(rng());
    picks.push_back({face, Eigen::Vector3d(1.0 - r1, r1 * (1.0 - r2), r1 * r2)});
  }
  return picks;
}

std::vector<PointSample> evaluate_picks(const TriangleMesh& mesh, const std::vector<SurfacePick>& picks) {
  std::vector<PointSample> out;
  out.reserve(picks.size());
  for (const auto& p : picks) {
    const Face& f = mesh.faces()[static_cast<std::size_t>(p.face)];
    const auto& v = mesh.vertices();
    const Eigen::Vector3d pos = p.bary[0] * v[static_cast<std::size_t>(f[0])] +
                                p.bary[1] * v[static_cast<std::size_t>(f[1])] +
                                p.bary[2] * v[static_cast<std::size_t>(f[2])];
    out.push_back({pos, mesh.face_normal(p.face)});
  }
  return out;
}

std::vector<PointSample> sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
  return evaluate_picks(mesh, pick_surface(mesh, count, seed));
}

}  // namespace mvmesh
