#pragma once

#include <Eigen/Core>

#include <vector>

namespace mvmesh {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Brute-force nearest neighbour in `to` for every row of `from`.
/// Ties go to the lowest index. Optionally reports squared distances.
std::vector<int> nearest_indices(const PointMatrix& from, const PointMatrix& to, std::vector<double>* sq_dist = nullptr);

}  // namespace mvmesh
