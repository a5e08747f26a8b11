#include "mvmesh/pipeline/gradsuite.hpp"

#include "mvmesh/diffmath/conv.hpp"
#include "mvmesh/diffmath/layers.hpp"
#include "mvmesh/diffmath/sampling.hpp"
#include "mvmesh/featfuse/contrastive.hpp"
#include "mvmesh/featfuse/pooling.hpp"
#include "mvmesh/geomcore/geometry_ops.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/geomcore/sampling.hpp"
#include "mvmesh/lossmetrics/losses.hpp"
#include "mvmesh/meshrefine/gcn.hpp"
#include "mvmesh/mvsdepth/mvs_net.hpp"
#include "mvmesh/voxelgrid/voxel_net.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mvmesh {

namespace {

using V = std::vector<Var<double>>;

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(derived_rng(seed, "gradsuite")) {}

  Tensor<double> rand(Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * uniform01(rng_());
    return t;
  }
  /// Magnitudes in [0.2, 1] with random signs, clear of kinks at 0.
  Tensor<double> off_zero(Shape shape) {
    Tensor<double> t = rand(std::move(shape), 0.2, 1.0);
    for (Index i = 0; i < t.size(); ++i)
      if (rng_() & 1) t[i] = -t[i];
    return t;
  }

  void inputs(const std::string& name, const GradFunction& f, std::vector<Tensor<double>> xs) {
    items.push_back({name, check_gradients(f, std::move(xs))});
  }
  void params(const std::string& name, ParameterSet<double>& p, const ParamLossFunction& loss) {
    items.push_back({name, check_parameter_gradients(p, loss)});
  }

  Rng& rng() { return rng_; }
  std::vector<GradSuiteItem> items;

 private:
  Rng rng_;
};

CameraView camera_at(double angle, double radius, int size) {
  return CameraView::look_at({radius * std::sin(angle), -radius * std::cos(angle), 0.25}, {0, 0, 0}, {0, 0, 1},
                             1.25 * size, size, size);
}

void elementwise_ops(Suite& s) {
  s.inputs("add", [](Tape<double>&, const V& v) { return v[0] + v[1]; }, {s.rand({2, 3}), s.rand({3})});
  s.inputs("sub", [](Tape<double>&, const V& v) { return v[0] - v[1]; }, {s.rand({2, 3}), s.rand({2, 1})});
  s.inputs("mul", [](Tape<double>&, const V& v) { return v[0] * v[1]; }, {s.rand({2, 3}), s.rand({3})});
  s.inputs("div", [](Tape<double>&, const V& v) { return v[0] / v[1]; }, {s.rand({2, 3}), s.rand({2, 1}, 0.5, 2.0)});
  s.inputs("relu", [](Tape<double>&, const V& v) { return relu(v[0]); }, {s.off_zero({3, 4})});
  s.inputs("abs", [](Tape<double>&, const V& v) { return abs(v[0]); }, {s.off_zero({3, 4})});
  s.inputs("tanh", [](Tape<double>&, const V& v) { return tanh(v[0]); }, {s.rand({3, 4}, -2, 2)});
  s.inputs("sigmoid", [](Tape<double>&, const V& v) { return sigmoid(v[0]); }, {s.rand({3, 4}, -3, 3)});
  s.inputs("exp", [](Tape<double>&, const V& v) { return exp(v[0]); }, {s.rand({3, 4})});
  s.inputs("log", [](Tape<double>&, const V& v) { return log(v[0]); }, {s.rand({3, 4}, 0.2, 2.0)});
  s.inputs("sqrt", [](Tape<double>&, const V& v) { return sqrt(v[0]); }, {s.rand({3, 4}, 0.2, 2.0)});
  s.inputs("square", [](Tape<double>&, const V& v) { return square(v[0]); }, {s.rand({3, 4})});
  s.inputs("affine", [](Tape<double>&, const V& v) { return affine(v[0], -1.5, 0.25); }, {s.rand({4})});
}

void structural_ops(Suite& s) {
  s.inputs("matmul", [](Tape<double>&, const V& v) { return matmul(v[0], v[1]); }, {s.rand({3, 4}), s.rand({4, 2})});
  s.inputs("bmm", [](Tape<double>&, const V& v) { return bmm(v[0], v[1]); }, {s.rand({2, 3, 4}), s.rand({2, 4, 2})});
  s.inputs("softmax", [](Tape<double>&, const V& v) { return softmax(v[0], 1); }, {s.rand({3, 4, 2}, -2, 2)});
  s.inputs("sum_axis", [](Tape<double>&, const V& v) { return sum(v[0], 1); }, {s.rand({2, 3, 4})});
  s.inputs("mean_axis", [](Tape<double>&, const V& v) { return mean(v[0], 2, true); }, {s.rand({2, 3, 4})});
  s.inputs("max_axis", [](Tape<double>&, const V& v) { return max(v[0], 0); }, {s.rand({3, 5})});
  s.inputs("permute", [](Tape<double>&, const V& v) { return permute(v[0], {2, 0, 1}); }, {s.rand({2, 3, 4})});
  s.inputs("slice", [](Tape<double>&, const V& v) { return slice(v[0], 2, 1, 3); }, {s.rand({2, 3, 4})});
  s.inputs("concat", [](Tape<double>&, const V& v) { return concat<double>({v[0], v[1]}, 1); },
           {s.rand({2, 3}), s.rand({2, 2})});
  s.inputs("stack", [](Tape<double>&, const V& v) { return stack<double>({v[0], v[1]}, 0); },
           {s.rand({2, 3}), s.rand({2, 3})});
  s.inputs("gather_rows", [](Tape<double>&, const V& v) { return gather_rows(v[0], {2, 0, 2, 1}); }, {s.rand({3, 4})});
  s.inputs("conv2d", [](Tape<double>&, const V& v) { return conv(v[0], v[1], v[2], 2, 1); },
           {s.rand({2, 6, 5}), s.rand({3, 2, 3, 3}), s.rand({3})});
  s.inputs("conv3d", [](Tape<double>&, const V& v) { return conv(v[0], v[1], v[2], 1, 1); },
           {s.rand({2, 3, 4, 4}), s.rand({2, 2, 3, 3, 3}), s.rand({2})});
  // Sample points off pixel centres, where the bilinear weights have kinks.
  Tensor<double> pts = s.rand({6, 2}, 0.3, 4.7);
  for (Index i = 0; i < pts.size(); ++i)
    if (std::abs(pts[i] - std::floor(pts[i]) - 0.5) < 0.05) pts[i] += 0.1;
  s.inputs("sample_bilinear", [](Tape<double>&, const V& v) { return sample_bilinear(v[0], v[1]); },
           {s.rand({3, 5, 5}), pts});
  s.inputs("resize_bilinear", [](Tape<double>&, const V& v) { return resize_bilinear(v[0], 3, 3); }, {s.rand({2, 6, 6})});
}

void geometry_ops(Suite& s) {
  const TriangleMesh mesh = icosphere(0, 0.3, Eigen::Vector3d(0.0, 0.0, 1.0));
  const Tensor<double> verts = vertices_tensor<double>(mesh.vertices());
  const CameraView cam = CameraView::look_at({0, 0, 0}, {0, 0, 1}, {0, -1, 0}, 10.0, 8, 8);
  s.inputs("project_points", [cam](Tape<double>&, const V& v) { return project_points(v[0], cam); }, {verts});
  const auto picks = pick_surface(mesh, 10, 3);
  std::vector<int> ids;
  for (const auto& p : picks) ids.push_back(p.face);
  s.inputs("barycentric_points", [&](Tape<double>&, const V& v) { return barycentric_points(v[0], mesh.faces(), picks); },
           {verts});
  s.inputs("face_normals", [&](Tape<double>&, const V& v) { return face_normals(v[0], mesh.faces(), ids); }, {verts});
  s.inputs("neighbor_sum", [&](Tape<double>&, const V& v) { return neighbor_sum(v[0], *mesh.topology()); },
           {s.rand({12, 4})});
}

void losses(Suite& s) {
  auto unit_rows = [&](Index n) {
    Tensor<double> t = s.rand({n, 3});
    for (Index i = 0; i < n; ++i) {
      const double l = std::sqrt(t[3 * i] * t[3 * i] + t[3 * i + 1] * t[3 * i + 1] + t[3 * i + 2] * t[3 * i + 2]);
      for (Index k = 0; k < 3; ++k) t[3 * i + k] /= l;
    }
    return t;
  };
  const Tensor<double> P = s.rand({12, 3}), Q = s.rand({15, 3});
  s.inputs("chamfer", [](Tape<double>&, const V& v) { return chamfer(v[0], v[1]); }, {P, Q});
  s.inputs("normal_loss",
           [P, Q](Tape<double>& t, const V& v) { return normal_loss(v[0], v[1], nearest_pairs(t.constant(P), t.constant(Q))); },
           {unit_rows(12), unit_rows(15)});
  const TriangleMesh cube = box(Eigen::Vector3d(0.3, 0.2, 0.4));
  Tensor<double> cv = vertices_tensor<double>(cube.vertices());
  const Tensor<double> jitter = s.rand(cv.shape(), -0.02, 0.02);
  cv.values() += jitter.values();
  s.inputs("edge_loss", [&](Tape<double>&, const V& v) { return edge_loss(v[0], cube.edges()); }, {cv});
  const Tensor<double> res({6}, {0.1, -0.3, 0.9, -1.7, 2.2, 0.45});
  const Tensor<double> mask({6}, {1, 1, 1, 1, 0, 1});
  s.inputs("berhu", [mask](Tape<double>&, const V& v) { return berhu(v[0], mask, 0.6); }, {res});
  const Tensor<double> y({5}, {0, 1, 1, 0, 1});
  s.inputs("voxel_bce", [y](Tape<double>&, const V& v) { return voxel_bce(v[0], y); },
           {Tensor<double>({5}, {0.1, 0.4, 0.6, 0.8, 0.95})});
}

void network_blocks(Suite& s) {
  for (PoolKind kind : {PoolKind::Attention, PoolKind::Simple, PoolKind::Stats}) {
    PoolConfig cfg;
    cfg.kind = kind;
    cfg.heads = 2;
    cfg.head_dim = 3;
    cfg.pooled_dim = 4;
    auto pool = std::make_shared<FeaturePool<double>>(cfg, 5, "pool");
    auto params = std::make_shared<ParameterSet<double>>();
    pool->init(*params, s.rng());
    const Tensor<double> x = s.rand({3, 4, 5});
    const std::string name = to_string(kind) + "_pool";
    s.inputs(name + "_inputs", [pool, params](Tape<double>& t, const V& v) {
      Bound<double> b(t, *params);
      return (*pool)(b, v[0]);
    }, {x});
    if (kind != PoolKind::Stats)
      s.params(name + "_params", *params, [pool, params, x](Tape<double>& t) {
        Bound<double> b(t, *params);
        return sum(square((*pool)(b, t.constant(x))));
      });
  }

  const TriangleMesh ico = icosphere(0, 1.0);
  s.inputs("graph_conv",
           [&](Tape<double>&, const V& v) { return graph_conv(v[0], *ico.topology(), v[1], v[2], &v[3]); },
           {s.rand({12, 3}, 0.1, 1.0), s.rand({3, 4}), s.rand({3, 4}), s.rand({4}, 0.1, 0.5)});
  s.inputs("vertex_refine", [](Tape<double>&, const V& v) { return vertex_refine(v[0], v[1], v[2]); },
           {s.rand({5, 3}), s.rand({5, 4}), s.rand({7, 3})});

  {
    StageConfig cfg;
    cfg.pool.heads = 2;
    cfg.pool.head_dim = 3;
    cfg.pool.pooled_dim = 4;
    cfg.gcn_layers = 2;
    cfg.gcn_hidden = 6;
    cfg.refine_init_scale = 1.0;
    RefineStage<double> stage(cfg, 5, "stage0");
    ParameterSet<double> params;
    stage.init(params, s.rng());
    const Tensor<double> verts = vertices_tensor<double>(ico.vertices());
    const Tensor<double> feats = s.rand({2, 12, 5});
    s.params("refine_stage_params", params, [&](Tape<double>& t) {
      Bound<double> b(t, params);
      return sum(square(stage(b, t.constant(verts), *ico.topology(), t.constant(feats))));
    });
  }

  s.inputs("variance_volume", [](Tape<double>&, const V& v) { return variance_volume(v); },
           {s.rand({2, 3}), s.rand({2, 3}), s.rand({2, 3})});
  const DepthHypotheses hyps{0.7, 0.15, 4};
  s.inputs("soft_argmin", [hyps](Tape<double>&, const V& v) { return soft_argmin(softmax(v[0], 0), hyps); },
           {s.rand({4, 6}, -2, 2)});
  {
    MvsConfig cfg;
    cfg.feature_channels = {4, 4};
    cfg.feature_strides = {2, 2};
    cfg.regularization_channels = 3;
    MvsNet<double> net(cfg);
    ParameterSet<double> params;
    net.init(params, s.rng());
    const std::vector<CameraView> cams{camera_at(0.0, 1.0, 8), camera_at(std::acos(-1.0), 1.0, 8)};
    const Tensor<double> i0 = s.rand({3, 8, 8}, 0, 1), i1 = s.rand({3, 8, 8}, 0, 1);
    const Tensor<double> gt = s.rand({2, 2}, 0.8, 1.1);
    s.params("mvs_soft_argmin_path", params, [&](Tape<double>& t) {
      Bound<double> b(t, params);
      auto d = net.predict_all_views(b, {t.constant(i0), t.constant(i1)}, cams, hyps);
      return mean(square(d[0] - t.constant(gt))) + mean(square(d[1] - t.constant(gt)));
    });
  }
  {
    ContrastiveConfig cfg;
    cfg.channels = {3, 4, 5, 6};
    DepthFeatureExtractor<double> ex(cfg);
    ParameterSet<double> params;
    ex.init(params, s.rng());
    // Zero biases leave dead receptive fields exactly on the relu kink.
    for (auto& [name, p] : params)
      if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) p.value = s.rand(p.value.shape(), 0.05, 0.3);
    const Tensor<double> rendered = s.rand({8, 8}, 0.8, 1.2), predicted = s.rand({8, 8}, 0.8, 1.2);
    const CameraView cam = CameraView::look_at({0, 0, 0}, {0, 0, 1}, {0, -1, 0}, 10.0, 8, 8);
    const Tensor<double> verts({3, 3}, {0.07, -0.11, 1.1, -0.2, 0.13, 0.9, 0.13, 0.17, 1.0});
    s.params("contrastive_features_params", params, [&](Tape<double>& t) {
      Bound<double> b(t, params);
      return sum(square(vertex_features(t.constant(verts), cam, ex.extract(b, rendered, t.constant(predicted)))));
    });
  }
  {
    VoxelNetConfig cfg;
    cfg.grid_resolution = 4;
    cfg.encoder_channels = {3, 4};
    cfg.encoder_strides = {2, 1};
    cfg.head_channels = 4;
    VoxelNet<double> net(cfg);
    ParameterSet<double> params;
    net.init(params, s.rng());
    const Tensor<double> img = s.rand({3, 8, 8}, 0, 1);
    Tensor<double> target = s.rand({4, 4, 4}, 0, 1);
    for (Index i = 0; i < target.size(); ++i) target[i] = target[i] > 0.5 ? 1.0 : 0.0;
    s.params("voxel_head_bce_params", params, [&](Tape<double>& t) {
      Bound<double> b(t, params);
      return voxel_bce(net.voxel_head(b, net.encode(b, t.constant(img))), target);
    });
  }
}

}  // namespace

std::vector<GradSuiteItem> run_gradient_suite(std::uint64_t seed) {
  Suite s(seed);
  elementwise_ops(s);
  structural_ops(s);
  geometry_ops(s);
  losses(s);
  network_blocks(s);
  return std::move(s.items);
}

void write_gradient_suite(std::ostream& out, const std::vector<GradSuiteItem>& items) {
  char buf[256];
  for (const auto& it : items) {
    std::snprintf(buf, sizeof buf, "%-30s %s  max_rel_err=%.3e  checked=%ld%s%s\n", it.name.c_str(),
                  it.passed() ? "PASS" : "FAIL", it.result.max_rel_error, static_cast<long>(it.result.checked),
                  it.result.worst.empty() ? "" : "  worst=", it.result.worst.c_str());
    out << buf;
  }
}

}  // namespace mvmesh
