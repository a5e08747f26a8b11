#include "doctest.h"

#include "mvmesh/diffmath/gradcheck.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/lossmetrics/losses.hpp"
#include "mvmesh/voxelgrid/cubify.hpp"
#include "mvmesh/voxelgrid/grid.hpp"
#include "mvmesh/voxelgrid/io.hpp"
#include "mvmesh/voxelgrid/voxel_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace mvmesh;

namespace {

GridGeometry small_geometry() { return GridGeometry({4, 3, 2}, Eigen::Vector3d(-0.2, -0.15, 0.4), 0.1); }

OccupancyGrid random_grid(const GridGeometry& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(g.voxel_count()));
  for (double& v : p) v = u(rng);
  return OccupancyGrid(g, GridFrame::World, p);
}

// Independent per-voxel evaluation: logit, sum, logistic, clamp.
double oracle_merge(const std::vector<double>& ps) {
  double l = 0.0;
  for (double p : ps) {
    const double q = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
    l += std::log(q) - std::log1p(-q);
  }
  const double s = 1.0 / (1.0 + std::exp(-l));
  return std::min(std::max(s, 1e-6), 1.0 - 1e-6);
}

OccupancyGrid occupancy_of(const std::vector<std::array<int, 3>>& cells, std::array<int, 3> dims = {4, 4, 4}) {
  GridGeometry g(dims, Eigen::Vector3d::Zero(), 1.0);
  OccupancyGrid grid(g, GridFrame::World, 0.0);
  for (const auto& c : cells) grid.values[static_cast<std::size_t>(g.index(c[0], c[1], c[2]))] = 1.0;
  return grid;
}

double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces())
    v += m.vertices()[f[0]].dot(m.vertices()[f[1]].cross(m.vertices()[f[2]])) / 6.0;
  return v;
}

}  // namespace

TEST_CASE("to_logodds examples") {
  OccupancyGrid g(GridGeometry({3, 1, 1}, Eigen::Vector3d::Zero(), 1.0), GridFrame::World,
                  std::vector<double>{0.5, 0.8, 0.0});
  const LogOddsGrid l = to_logodds(g);
  CHECK(l.values[0] == 0.0);
  CHECK(l.values[1] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(std::isfinite(l.values[2]));
  CHECK(std::abs(l.values[2]) <= logit(1.0 - kProbEpsilon) + 1e-12);

  for (double p = kProbEpsilon; p <= 1.0 - kProbEpsilon; p += 0.0137)
    CHECK(std::abs(sigmoid(logit(p)) - p) <= 1e-9);
}

TEST_CASE("merge_views examples") {
  const GridGeometry geo({1, 1, 1}, Eigen::Vector3d::Zero(), 1.0);
  auto single = [&](double p) { return to_logodds(OccupancyGrid(geo, GridFrame::World, p)); };
  CHECK(merge_views({single(0.8), single(0.8)}).values[0] == doctest::Approx(16.0 / 17.0).epsilon(1e-12));
  CHECK(std::abs(merge_views({single(0.9), single(0.1)}).values[0] - 0.5) <= 1e-12);

  const OccupancyGrid r = random_grid(small_geometry(), 1);
  const OccupancyGrid one = merge_views({to_logodds(r)});
  for (std::size_t i = 0; i < r.values.size(); ++i) CHECK(std::abs(one.values[i] - r.values[i]) <= 1e-12);

  LogOddsGrid other = to_logodds(random_grid(GridGeometry({4, 3, 3}, Eigen::Vector3d::Zero(), 0.1), 2));
  CHECK_THROWS_AS(merge_views({to_logodds(r), other}), ValidationError);
  CHECK_THROWS_AS(merge_views({}), ValidationError);
}

TEST_CASE("merge_views matches per-voxel oracle and is order invariant") {
  const GridGeometry g = small_geometry();
  std::vector<OccupancyGrid> grids;
  for (int i = 0; i < 5; ++i) grids.push_back(random_grid(g, 10 + i));
  std::vector<LogOddsGrid> logs;
  for (const auto& gr : grids) logs.push_back(to_logodds(gr));
  const OccupancyGrid merged = merge_views(logs);
  for (int v = 0; v < g.voxel_count(); ++v) {
    std::vector<double> ps;
    for (const auto& gr : grids) ps.push_back(gr.values[v]);
    CHECK(std::abs(merged.values[v] - oracle_merge(ps)) <= 1e-9);
  }
  std::vector<int> order{0, 1, 2, 3, 4};
  std::mt19937_64 rng(3);
  for (int t = 0; t < 6; ++t) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<LogOddsGrid> perm;
    for (int i : order) perm.push_back(logs[i]);
    const OccupancyGrid m2 = merge_views(perm);
    for (int v = 0; v < g.voxel_count(); ++v) CHECK(m2.values[v] == merged.values[v]);
  }
}

TEST_CASE("merge is associative with incremental updates") {
  const GridGeometry g = small_geometry();
  const LogOddsGrid a = to_logodds(random_grid(g, 21)), b = to_logodds(random_grid(g, 22)),
                    c = to_logodds(random_grid(g, 23));
  const OccupancyGrid inc = to_probability(accumulate(accumulate(a, b), c));
  const OccupancyGrid all = merge_views({a, b, c});
  for (int v = 0; v < g.voxel_count(); ++v) CHECK(std::abs(inc.values[v] - all.values[v]) <= 1e-9);
}

TEST_CASE("raising one view never lowers the merged probability") {
  const GridGeometry g = small_geometry();
  const OccupancyGrid a = random_grid(g, 31), b = random_grid(g, 32);
  OccupancyGrid a_up = a;
  for (double& p : a_up.values) p = std::min(1.0 - kProbEpsilon, p + 0.1);
  const OccupancyGrid m = merge_views({to_logodds(a), to_logodds(b)});
  const OccupancyGrid m_up = merge_views({to_logodds(a_up), to_logodds(b)});
  for (int v = 0; v < g.voxel_count(); ++v) CHECK(m_up.values[v] >= m.values[v]);
}

TEST_CASE("resample_to_world examples") {
  Eigen::Matrix3d K;
  K << 80, 0, 32, 0, 80, 32, 0, 0, 1;
  Matrix34d T = Matrix34d::Zero();
  T.leftCols<3>().setIdentity();
  const CameraView cam(K, T, 64, 64);

  const GridGeometry geo = small_geometry();
  LogOddsGrid local = to_logodds(random_grid(geo, 41));
  local.frame = GridFrame::CameraLocal;
  const LogOddsGrid same = resample_to_world(local, cam, geo);
  for (int v = 0; v < geo.voxel_count(); ++v) CHECK(std::abs(same.values[v] - local.values[v]) <= 1e-12);

  // Two-value grid along x shifted by half a voxel.
  const GridGeometry two({2, 1, 1}, Eigen::Vector3d::Zero(), 1.0);
  LogOddsGrid l2{two, GridFrame::CameraLocal, {1.5, -0.5}};
  const GridGeometry shifted({1, 1, 1}, Eigen::Vector3d(0.5, 0.0, 0.0), 1.0);
  CHECK(resample_to_world(l2, cam, shifted).values[0] == doctest::Approx(0.5).epsilon(1e-15));

  const GridGeometry far({1, 1, 1}, Eigen::Vector3d(10.0, 0.0, 0.0), 1.0);
  CHECK(resample_to_world(l2, cam, far).values[0] == 0.0);
}

TEST_CASE("resample_to_world follows camera motion") {
  // A camera translated by +0.1 in x sees world point p at camera x = p.x + 0.1.
  Eigen::Matrix3d K;
  K << 80, 0, 32, 0, 80, 32, 0, 0, 1;
  Matrix34d T = Matrix34d::Zero();
  T.leftCols<3>().setIdentity();
  T(0, 3) = 0.1;
  const CameraView cam(K, T, 64, 64);
  const GridGeometry geo({6, 1, 1}, Eigen::Vector3d(0.0, 0.0, 0.0), 0.1);
  LogOddsGrid local{geo, GridFrame::CameraLocal, {0, 1, 2, 3, 4, 5}};
  const LogOddsGrid w = resample_to_world(local, cam, geo);
  for (int x = 0; x < 5; ++x) CHECK(w.values[x] == doctest::Approx(x + 1.0).epsilon(1e-12));
  CHECK(w.values[5] == 0.0);
}

TEST_CASE("cubify counts") {
  const TriangleMesh one = cubify(occupancy_of({{1, 1, 1}}));
  CHECK(one.vertex_count() == 8);
  CHECK(one.face_count() == 12);
  const TriangleMesh pair = cubify(occupancy_of({{1, 1, 1}, {1, 1, 2}}));
  CHECK(pair.vertex_count() == 12);
  CHECK(pair.face_count() == 20);
  CHECK_THROWS_AS(cubify(occupancy_of({})), EmptyGridError);
}

TEST_CASE("cubify output is closed, oriented and placed") {
  const std::vector<std::vector<std::array<int, 3>>> fixtures = {
      {{0, 0, 0}},
      {{1, 1, 1}, {1, 1, 2}},
      {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 1, 1}},
      {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 1, 0}, {0, 0, 1}, {1, 0, 1}},
  };
  for (const auto& cells : fixtures) {
    const TriangleMesh m = cubify(occupancy_of(cells));
    CHECK(3 * m.face_count() == 2 * static_cast<int>(m.edges().size()));
    CHECK(m.euler_characteristic() == 2);
    CHECK(signed_volume(m) == doctest::Approx(static_cast<double>(cells.size())));
  }
  // Whole-grid block touches the border.
  GridGeometry g({3, 3, 3}, Eigen::Vector3d(-1, -1, -1), 0.5);
  const TriangleMesh full = cubify(OccupancyGrid(g, GridFrame::World, 1.0));
  CHECK(full.euler_characteristic() == 2);
  CHECK(signed_volume(full) == doctest::Approx(27 * 0.125));
  for (const auto& v : full.vertices()) CHECK(v.cwiseAbs().maxCoeff() <= 1.0 - 0.5 + 1e-12 + 0.5);
}

TEST_CASE("cubify edge loss of a unit voxel is 4/3") {
  const TriangleMesh m = cubify(occupancy_of({{0, 0, 0}}));
  CHECK(m.edges().size() == 18);
  Tape<double> tape;
  Tensor<double> v({m.vertex_count(), 3});
  for (int i = 0; i < m.vertex_count(); ++i)
    for (int k = 0; k < 3; ++k) v[3 * i + k] = m.vertices()[i][k];
  CHECK(edge_loss(tape.constant(v), m.edges()).value().item() == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("cubify threshold is respected") {
  GridGeometry g({2, 1, 1}, Eigen::Vector3d::Zero(), 1.0);
  OccupancyGrid grid(g, GridFrame::World, std::vector<double>{0.5, 0.49});
  CHECK(cubify(grid).vertex_count() == 8);
  CHECK(cubify(grid, 0.4).vertex_count() == 12);
}

TEST_CASE("voxelize a box") {
  const Eigen::Vector3d size(0.3, 0.18, 0.1);
  const TriangleMesh b = box(size);
  const GridGeometry g = GridGeometry::centered(16, 0.64, Eigen::Vector3d::Zero());
  const OccupancyGrid occ = voxelize(b, g, GridFrame::World);
  // Analytic count: voxel centres -0.30, -0.26, ..., 0.30 strictly inside each half-extent.
  int expected = 1;
  for (int k = 0; k < 3; ++k) {
    int n = 0;
    for (int i = 0; i < 16; ++i) n += std::abs(-0.32 + (i + 0.5) * 0.04) < size[k] / 2;
    expected *= n;
  }
  CHECK(expected == 8 * 4 * 2);
  CHECK(occ.count_at_least(0.5) == expected);
}

TEST_CASE("voxp round trip and errors") {
  const OccupancyGrid g = random_grid(GridGeometry({3, 2, 2}, Eigen::Vector3d(0.25, -0.5, 1.0), 0.125), 5);
  std::stringstream ss;
  write_voxp(ss, g);
  const OccupancyGrid back = read_voxp(ss);
  CHECK(back.geometry == g.geometry);
  for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(std::abs(back.values[i] - g.values[i]) <= 1e-6);

  std::stringstream bad("VOXQ");
  CHECK_THROWS_AS(read_voxp(bad), ValidationError);
  std::string bytes;
  {
    std::stringstream s2;
    write_voxp(s2, g);
    bytes = s2.str();
  }
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_voxp(truncated), ValidationError);
}

TEST_CASE("voxel head shape and zero weights") {
  VoxelNetConfig cfg;
  cfg.grid_resolution = 8;
  VoxelNet<float> net(cfg);
  ParameterSet<float> params;
  Rng rng(1);
  net.init(params, rng);
  Tape<float> tape;
  Bound<float> b(tape, params);
  Tensor<float> img({3, 32, 32}, 0.3f);
  auto p = net.voxel_head(b, net.encode(b, tape.constant(img)));
  CHECK(p.shape() == Shape{8, 8, 8});

  for (auto& [name, prm] : params)
    if (name.rfind("voxel.head", 0) == 0) prm.value.values().setZero();
  Tape<float> tape2;
  Bound<float> b2(tape2, params);
  auto p0 = net.voxel_head(b2, net.encode(b2, tape2.constant(img)));
  for (Index i = 0; i < p0.size(); ++i) CHECK(p0.value()[i] == 0.5f);
  const OccupancyGrid grid =
      occupancy_from_tensor(p0.value(), local_grid_geometry(8, 0.64, 1.0), GridFrame::CameraLocal);
  CHECK(grid.values.size() == 512);
}

TEST_CASE("voxel BCE gradient w.r.t. head weights") {
  VoxelNetConfig cfg;
  cfg.grid_resolution = 4;
  cfg.encoder_channels = {4, 4};
  cfg.encoder_strides = {2, 2};
  cfg.head_channels = 4;
  VoxelNet<double> net(cfg);
  ParameterSet<double> params;
  Rng rng(7);
  net.init(params, rng);
  Tensor<double> img({3, 16, 16});
  std::mt19937_64 r2(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < img.size(); ++i) img[i] = u(r2);
  Tensor<double> target({4, 4, 4});
  for (Index i = 0; i < target.size(); ++i) target[i] = (i % 3 == 0) ? 1.0 : 0.0;
  auto r = check_parameter_gradients(
      params,
      [&](Tape<double>& tape) {
        Bound<double> b(tape, params);
        return voxel_bce(net.voxel_head(b, net.encode(b, tape.constant(img))), target);
      },
      "voxel.head");
  CHECK(r.checked > 0);
  CHECK(r.passed(1e-4));
}
