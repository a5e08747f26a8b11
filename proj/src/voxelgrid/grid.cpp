#include "mvmesh/voxelgrid/grid.hpp"

#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mvmesh {

GridGeometry::GridGeometry(std::array<int, 3> d, const Eigen::Vector3d& o, double s) : dims(d), origin(o), spacing(s) {
  for (int k = 0; k < 3; ++k)
    if (dims[k] <= 0) throw ValidationError("grid dims must be positive, got " + to_string(*this));
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("grid spacing must be positive");
  if (!origin.allFinite()) throw ValidationError("grid origin must be finite");
}

GridGeometry GridGeometry::centered(int resolution, double extent, const Eigen::Vector3d& center) {
  if (resolution <= 0) throw ValidationError("grid resolution must be positive");
  return GridGeometry({resolution, resolution, resolution}, center - Eigen::Vector3d::Constant(extent / 2.0),
                      extent / resolution);
}

std::string to_string(const GridGeometry& g) {
  std::ostringstream os;
  os << g.dims[0] << 'x' << g.dims[1] << 'x' << g.dims[2] << " @ (" << g.origin.x() << ", " << g.origin.y() << ", "
     << g.origin.z() << ") spacing " << g.spacing;
  return os.str();
}

double clamp_probability(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

double logit(double p) {
  // Evaluated on the upper half so logit(1-p) == -logit(p) bit for bit.
  if (p < 0.5) {
    const double q = 1.0 - p;
    return -std::log(q / (1.0 - q));
  }
  return std::log(p / (1.0 - p));
}

double sigmoid(double l) { return l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l)); }

OccupancyGrid::OccupancyGrid(GridGeometry g, GridFrame f, std::vector<double> probabilities)
    : geometry(std::move(g)), frame(f), values(std::move(probabilities)) {
  if (static_cast<int>(values.size()) != geometry.voxel_count())
    throw ValidationError("occupancy grid: " + std::to_string(values.size()) + " values for " + to_string(geometry));
  for (double& p : values) {
    if (std::isnan(p)) throw ValidationError("occupancy grid: NaN probability");
    p = clamp_probability(p);
  }
}

OccupancyGrid::OccupancyGrid(GridGeometry g, GridFrame f, double fill)
    : OccupancyGrid(g, f, std::vector<double>(static_cast<std::size_t>(g.voxel_count()), fill)) {}

int OccupancyGrid::count_at_least(double threshold) const {
  return static_cast<int>(std::count_if(values.begin(), values.end(), [threshold](double p) { return p >= threshold; }));
}

LogOddsGrid to_logodds(const OccupancyGrid& g) {
  LogOddsGrid out{g.geometry, g.frame, std::vector<double>(g.values.size())};
  for (std::size_t i = 0; i < g.values.size(); ++i) out.values[i] = logit(clamp_probability(g.values[i]));
  return out;
}

LogOddsGrid accumulate(const LogOddsGrid& a, const LogOddsGrid& b) {
  if (a.geometry != b.geometry)
    throw ValidationError("merge: geometry mismatch " + to_string(a.geometry) + " vs " + to_string(b.geometry));
  LogOddsGrid out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

OccupancyGrid to_probability(const LogOddsGrid& g) {
  std::vector<double> p(g.values.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = sigmoid(g.values[i]);
  return OccupancyGrid(g.geometry, g.frame, std::move(p));
}

OccupancyGrid merge_views(const std::vector<LogOddsGrid>& grids) {
  if (grids.empty()) throw ValidationError("merge_views: need at least one grid");
  const GridGeometry& geo = grids.front().geometry;
  for (const auto& g : grids)
    if (g.geometry != geo)
      throw ValidationError("merge: geometry mismatch " + to_string(geo) + " vs " + to_string(g.geometry));
  // Summing each voxel's terms in sorted order makes the result independent
  // of view order down to the last bit.
  LogOddsGrid sum{geo, grids.front().frame, std::vector<double>(grids.front().values.size())};
  std::vector<double> terms(grids.size());
  for (std::size_t i = 0; i < sum.values.size(); ++i) {
    for (std::size_t v = 0; v < grids.size(); ++v) terms[v] = grids[v].values[i];
    std::sort(terms.begin(), terms.end());
    double l = 0.0;
    for (double t : terms) l += t;
    sum.values[i] = l;
  }
  return to_probability(sum);
}

LogOddsGrid resample_to_world(const LogOddsGrid& local, const CameraView& cam, const GridGeometry& target) {
  const GridGeometry& src = local.geometry;
  const Eigen::Vector3d hi = src.origin + src.extent();
  LogOddsGrid out{target, GridFrame::World, std::vector<double>(static_cast<std::size_t>(target.voxel_count()), 0.0)};
  auto lattice = [&](int x, int y, int z) {
    x = std::clamp(x, 0, src.dims[0] - 1);
    y = std::clamp(y, 0, src.dims[1] - 1);
    z = std::clamp(z, 0, src.dims[2] - 1);
    return local.at(x, y, z);
  };
  for (int z = 0; z < target.dims[2]; ++z)
    for (int y = 0; y < target.dims[1]; ++y)
      for (int x = 0; x < target.dims[0]; ++x) {
        const Eigen::Vector3d c = cam.to_camera(target.voxel_center(x, y, z));
        if ((c.array() < src.origin.array()).any() || (c.array() > hi.array()).any()) continue;
        // Continuous lattice coordinate: centres sit at integers.
        const Eigen::Vector3d q = (c - src.origin) / src.spacing - Eigen::Vector3d::Constant(0.5);
        const Eigen::Vector3d f = q.array().floor();
        const int x0 = static_cast<int>(f.x()), y0 = static_cast<int>(f.y()), z0 = static_cast<int>(f.z());
        const Eigen::Vector3d a = q - f;
        double v = 0.0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const double w = (dx ? a.x() : 1.0 - a.x()) * (dy ? a.y() : 1.0 - a.y()) * (dz ? a.z() : 1.0 - a.z());
              if (w != 0.0) v += w * lattice(x0 + dx, y0 + dy, z0 + dz);
            }
        out.values[static_cast<std::size_t>(target.index(x, y, z))] = v;
      }
  return out;
}

OccupancyGrid voxelize(const TriangleMesh& mesh, const GridGeometry& geometry, GridFrame frame,
                       const Eigen::Isometry3d& grid_to_world) {
  std::vector<double> p(static_cast<std::size_t>(geometry.voxel_count()), 0.0);
  for (int z = 0; z < geometry.dims[2]; ++z)
    for (int y = 0; y < geometry.dims[1]; ++y)
      for (int x = 0; x < geometry.dims[0]; ++x)
        if (inside_mesh(mesh, grid_to_world * geometry.voxel_center(x, y, z)))
          p[static_cast<std::size_t>(geometry.index(x, y, z))] = 1.0;
  return OccupancyGrid(geometry, frame, std::move(p));
}

GridGeometry local_grid_geometry(int resolution, double extent, double center_depth) {
  return GridGeometry::centered(resolution, extent, Eigen::Vector3d(0.0, 0.0, center_depth));
}

}  // namespace mvmesh
