#include "doctest.h"

#include "mvmesh/depthrender/rasterize.hpp"
#include "mvmesh/diffmath/gradcheck.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/lossmetrics/losses.hpp"
#include "mvmesh/meshrefine/reconstructor.hpp"

#include <cmath>
#include <random>

using namespace mvmesh;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

MeshTopology path_graph() {
  MeshTopology topo(4, {});
  topo.neighbors = {{1}, {0, 2}, {1}, {}};
  return topo;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.image_size = 16;
  m.voxel.grid_resolution = 4;
  m.voxel.encoder_channels = {4, 4};
  m.voxel.encoder_strides = {2, 2};
  m.voxel.head_channels = 4;
  m.mvs.feature_channels = {3, 3};
  m.mvs.feature_strides = {2, 2};
  m.mvs.regularization_channels = 2;
  m.hypotheses = {0.8, 0.1, 4};
  m.contrastive.channels = {3, 3, 4, 4};
  m.stage.pool.heads = 2;
  m.stage.pool.head_dim = 3;
  m.stage.pool.pooled_dim = 4;
  m.stage.gcn_layers = 2;
  m.stage.gcn_hidden = 5;
  m.stage.refine_init_scale = 1.0;
  m.sphere_level = 0;
  m.sphere_radius = 0.25;
  m.stages = 2;
  return m;
}

std::vector<CameraView> tiny_cameras(int size) {
  std::vector<CameraView> cams;
  const Eigen::Vector3d target(0, 0, 1.0);
  cams.push_back(CameraView::look_at({0, 0, 0}, target, {0, -1, 0}, 1.25 * size, size, size));
  cams.push_back(CameraView::look_at({0.7, 0, 0.3}, target, {0, -1, 0}, 1.25 * size, size, size));
  return cams;
}

}  // namespace

TEST_CASE("graph conv identity and zero configurations") {
  const MeshTopology topo = path_graph();
  Tape<double> t;
  const Tensor<double> x = random_tensor({4, 3}, 1, 0.0, 1.0);
  Tensor<double> eye({3, 3});
  for (Index i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  auto y = graph_conv(t.constant(x), topo, t.constant(eye), t.constant(Tensor<double>({3, 3})));
  CHECK(y.value().values() == x.values());
  auto z = graph_conv(t.constant(x), topo, t.constant(Tensor<double>({3, 3})), t.constant(Tensor<double>({3, 3})));
  for (Index i = 0; i < z.size(); ++i) CHECK(z.value()[i] == 0.0);
  CHECK_THROWS_AS(graph_conv(t.constant(Tensor<double>({3, 3})), topo, t.constant(eye), t.constant(eye)), ShapeError);
}

TEST_CASE("graph conv on a path graph by hand") {
  const MeshTopology topo = path_graph();
  Tape<double> t;
  // Scalar features f = (1, -2, 3, 4); w0 = 0.5, w1 = 2, bias = 0.25.
  auto f = t.constant(Tensor<double>({4, 1}, {1.0, -2.0, 3.0, 4.0}));
  auto w0 = t.constant(Tensor<double>({1, 1}, {0.5}));
  auto w1 = t.constant(Tensor<double>({1, 1}, {2.0}));
  auto bias = t.constant(Tensor<double>({1}, {0.25}));
  auto y = graph_conv(f, topo, w0, w1, &bias);
  CHECK(y.value()[0] == doctest::Approx(std::max(0.0, 0.5 * 1 + 2 * (-2) + 0.25)));
  CHECK(y.value()[1] == doctest::Approx(std::max(0.0, 0.5 * -2 + 2 * (1 + 3) + 0.25)));
  CHECK(y.value()[2] == doctest::Approx(std::max(0.0, 0.5 * 3 + 2 * (-2) + 0.25)));
  CHECK(y.value()[3] == doctest::Approx(0.5 * 4 + 0.25));  // isolated: ReLU(W0 f + b)
}

TEST_CASE("graph conv is equivariant to vertex relabeling") {
  const TriangleMesh mesh = icosphere(1, 1.0);
  const Tensor<double> x = random_tensor({mesh.vertex_count(), 4}, 2);
  const Tensor<double> w0 = random_tensor({4, 5}, 3), w1 = random_tensor({4, 5}, 4);
  std::vector<int> perm(static_cast<std::size_t>(mesh.vertex_count()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);  // new index of old vertex i
  std::vector<Face> faces;
  for (const auto& f : mesh.faces()) faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
  const MeshTopology relabeled(mesh.vertex_count(), faces);
  Tensor<double> xp(x.shape());
  for (Index i = 0; i < x.dim(0); ++i)
    for (Index c = 0; c < 4; ++c) xp[perm[static_cast<std::size_t>(i)] * 4 + c] = x[i * 4 + c];
  Tape<double> t;
  auto y = graph_conv(t.constant(x), *mesh.topology(), t.constant(w0), t.constant(w1));
  auto yp = graph_conv(t.constant(xp), relabeled, t.constant(w0), t.constant(w1));
  double worst = 0.0;
  for (Index i = 0; i < x.dim(0); ++i)
    for (Index c = 0; c < 5; ++c)
      worst = std::max(worst, std::abs(y.value()[i * 5 + c] - yp.value()[perm[static_cast<std::size_t>(i)] * 5 + c]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("vertex refine") {
  Tape<double> t;
  const Tensor<double> v = random_tensor({6, 3}, 6);
  const Tensor<double> f = random_tensor({6, 4}, 7);
  auto same = vertex_refine(t.constant(v), t.constant(f), t.constant(Tensor<double>({7, 3})));
  CHECK(same.value().values() == v.values());
  auto moved = vertex_refine(t.constant(v), t.constant(f), t.constant(random_tensor({7, 3}, 8, -2, 2)));
  for (Index i = 0; i < v.size(); ++i) CHECK(std::abs(moved.value()[i] - v[i]) < 1.0);
  // Saturated weights round tanh to exactly 1 in floating point.
  auto saturated = vertex_refine(t.constant(v), t.constant(f), t.constant(random_tensor({7, 3}, 8, -50, 50)));
  for (Index i = 0; i < v.size(); ++i) CHECK(std::abs(saturated.value()[i] - v[i]) <= 1.0 + 1e-15);
  CHECK_THROWS_AS(vertex_refine(t.constant(v), t.constant(f), t.constant(Tensor<double>({6, 3}))), ShapeError);

  auto r = check_gradients(
      [](Tape<double>&, const std::vector<Var<double>>& in) { return vertex_refine(in[0], in[1], in[2]); },
      {v, f, random_tensor({7, 3}, 9)});
  CHECK(r.passed(1e-4));
}

TEST_CASE("graph conv gradients") {
  const TriangleMesh mesh = icosphere(0, 1.0);
  auto r = check_gradients(
      [&](Tape<double>&, const std::vector<Var<double>>& in) {
        return graph_conv(in[0], *mesh.topology(), in[1], in[2], &in[3]);
      },
      {random_tensor({12, 3}, 10), random_tensor({3, 4}, 11), random_tensor({3, 4}, 12), random_tensor({4}, 13)});
  CHECK(r.passed(1e-4));
}

TEST_CASE("zero-initialized stage returns the input mesh") {
  StageConfig cfg;
  cfg.pool.heads = 2;
  cfg.pool.head_dim = 3;
  cfg.pool.pooled_dim = 4;
  cfg.gcn_hidden = 6;
  cfg.refine_init_scale = 0.0;
  RefineStage<double> stage(cfg, 5, "stage0");
  ParameterSet<double> params;
  Rng rng(14);
  stage.init(params, rng);
  const TriangleMesh mesh = icosphere(1, 0.3);
  Tape<double> t;
  Bound<double> b(t, params);
  const Tensor<double> v = vertices_tensor<double>(mesh.vertices());
  auto out = stage(b, t.constant(v), *mesh.topology(), t.constant(random_tensor({3, mesh.vertex_count(), 5}, 15)));
  CHECK(out.value().values() == v.values());
}

TEST_CASE("refinement keeps topology and reaches every parameter") {
  const ModelConfig cfg = tiny_model();
  Reconstructor<double> model(cfg);
  ParameterSet<double> params;
  Rng rng(16);
  model.init(params, rng);
  const auto cams = tiny_cameras(cfg.image_size);
  const TriangleMesh gt = icosphere(1, 0.2, Eigen::Vector3d(0.02, -0.01, 1.0));
  std::vector<Tensor<double>> images;
  std::vector<Tensor<double>> gt_depth;
  for (const auto& c : cams) {
    images.push_back(shade_normals(gt, c, rasterize(gt, c)).tensor<double>());
    gt_depth.push_back(rasterize_depth(gt, model.depth_camera(c)).tensor<double>());
  }
  const TriangleMesh init = icosphere(0, 0.25, Eigen::Vector3d(0, 0, 1.0));

  Tape<double> t;
  Bound<double> b(t, params);
  std::vector<Var<double>> in;
  for (const auto& img : images) in.push_back(t.constant(img));
  auto depths = model.predict_depths(b, in, cams);
  auto probs = model.voxel_probabilities(b, in);
  auto res = model.refine(b, init, cams, depths, true);
  REQUIRE(res.meshes.size() == 2);
  REQUIRE(res.renders.size() == 3);
  REQUIRE(res.attention.size() == 2);
  for (const auto& m : res.meshes) {
    CHECK(m.vertex_count() == init.vertex_count());
    CHECK(m.faces() == init.faces());
    CHECK(m.edges().size() == init.edges().size());
  }

  LossTerms<double> terms;
  auto gt_pts = t.constant(vertices_tensor<double>(gt.vertices()));
  for (const auto& v : res.vertices) {
    terms.chamfer.push_back(chamfer(v, gt_pts));
    terms.edge.push_back(edge_loss(v, init.edges()));
  }
  for (std::size_t n = 0; n < cams.size(); ++n) {
    terms.depth.push_back(depth_berhu(depths[n], t.constant(gt_depth[n])));
    terms.voxel.push_back(voxel_bce(probs[n], Tensor<double>(probs[n].shape(), 0.0)));
  }
  LossWeights w = LossWeights::pretty();
  Var<double> loss = total_loss(t, terms, w);
  t.backward(loss);
  std::map<std::string, double> norms;
  for (auto& [p, g] : t.parameter_grads()) norms[p->name] = g.values().norm();
  for (auto& [name, p] : params) {
    INFO(name);
    CHECK(norms[name] > 0.0);
  }
}

TEST_CASE("initial mesh selection") {
  ModelConfig cfg = tiny_model();
  Reconstructor<double> model(cfg);
  OccupancyGrid empty(model.world_geometry(), GridFrame::World, 0.1);
  const InitialMesh fb = model.initial_mesh(empty);
  CHECK(fb.fallback);
  CHECK(fb.sphere);
  CHECK(fb.mesh.vertex_count() == 12);
  std::vector<double> p(64, 0.1);
  p[static_cast<std::size_t>(model.world_geometry().index(1, 2, 1))] = 0.9;
  const InitialMesh cube = model.initial_mesh(OccupancyGrid(model.world_geometry(), GridFrame::World, p));
  CHECK_FALSE(cube.sphere);
  CHECK(cube.mesh.vertex_count() == 8);
  cfg.sphere_init = true;
  Reconstructor<double> sphere(cfg);
  const InitialMesh s = sphere.initial_mesh(OccupancyGrid(model.world_geometry(), GridFrame::World, p));
  CHECK(s.sphere);
  CHECK_FALSE(s.fallback);
}
