#include "mvmesh/lossmetrics/nearest.hpp"

#include "mvmesh/error.hpp"

#include <limits>

namespace mvmesh {

std::vector<int> nearest_indices(const PointMatrix& from, const PointMatrix& to, std::vector<double>* sq_dist) {
  if (to.rows() == 0) throw ValidationError("nearest neighbour search in an empty point set");
  const Eigen::Index n = from.rows(), m = to.rows();
  std::vector<int> idx(static_cast<std::size_t>(n));
  if (sq_dist) sq_dist->assign(static_cast<std::size_t>(n), 0.0);
  const double* q = to.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double px = from(i, 0), py = from(i, 1), pz = from(i, 2);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double dx = q[3 * j] - px, dy = q[3 * j + 1] - py, dz = q[3 * j + 2] - pz;
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    idx[static_cast<std::size_t>(i)] = arg;
    if (sq_dist) (*sq_dist)[static_cast<std::size_t>(i)] = best;
  }
  return idx;
}

}  // namespace mvmesh
