#pragma once

#include "mvmesh/diffmath/layers.hpp"
#include "mvmesh/featfuse/pooling.hpp"
#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/geometry_ops.hpp"
#include "mvmesh/geomcore/mesh.hpp"

#include <string>
#include <vector>

namespace mvmesh {

/// ReLU(f_i W0 + sum_{j in N(i)} f_j W1 + b) over [V,Cin] row features.
template <typename T>
Var<T> graph_conv(const Var<T>& features, const MeshTopology& topo, const Var<T>& w0, const Var<T>& w1,
                  const Var<T>* bias = nullptr) {
  if (features.dim(0) != topo.vertex_count)
    throw ShapeError("graph_conv: " + std::to_string(features.dim(0)) + " feature rows for " +
                     std::to_string(topo.vertex_count) + " vertices");
  Var<T> y = matmul(features, w0) + matmul(neighbor_sum(features, topo), w1);
  if (bias) y = y + *bias;
  return relu(y);
}

/// v + tanh([f, v] W_vert), W_vert stored [F+3, 3].
template <typename T>
Var<T> vertex_refine(const Var<T>& vertices, const Var<T>& features, const Var<T>& w_vert) {
  if (w_vert.dim(0) != features.dim(1) + 3 || w_vert.dim(1) != 3)
    throw ShapeError("vertex_refine: W_vert " + shape_str(w_vert.shape()) + " does not fit " +
                     std::to_string(features.dim(1)) + " features + 3 coordinates");
  return vertices + tanh(matmul(concat(std::vector<Var<T>>{features, vertices}, 1), w_vert));
}

/// Parameters `<name>.w0`, `<name>.w1`, `<name>.b`.
template <typename T>
class GraphConvLayer {
 public:
  GraphConvLayer() = default;
  GraphConvLayer(std::string name, Index in, Index out) : name_(std::move(name)), in_(in), out_(out) {}

  void init(ParameterSet<T>& params, Rng& rng) const {
    const double sd = 1.0 / std::sqrt(static_cast<double>(in_));
    params.add(name_ + ".w0", normal_tensor<T>({in_, out_}, sd, rng));
    params.add(name_ + ".w1", normal_tensor<T>({in_, out_}, 0.4 * sd, rng));
    params.add(name_ + ".b", Tensor<T>({out_}));
  }

  Var<T> operator()(Bound<T>& b, const Var<T>& x, const MeshTopology& topo) const {
    Var<T> bias = b(name_ + ".b");
    return graph_conv(x, topo, b(name_ + ".w0"), b(name_ + ".w1"), &bias);
  }

 private:
  std::string name_;
  Index in_ = 0;
  Index out_ = 0;
};

struct StageConfig {
  PoolConfig pool;
  int gcn_layers = 3;
  int gcn_hidden = 128;
  double refine_init_scale = 1e-3;  // multiplies the fan-in stddev of W_vert
  void validate() const;
};

/// One refinement block: pool per-view vertex features, append coordinates,
/// graph convolutions, then the tanh vertex update. Topology is unchanged.
template <typename T>
class RefineStage {
 public:
  RefineStage(StageConfig cfg, int view_feature_dim, std::string prefix);

  void init(ParameterSet<T>& params, Rng& rng) const;

  /// `view_features` is [N,V,D]; returns the moved [V,3] vertices.
  Var<T> operator()(Bound<T>& b, const Var<T>& vertices, const MeshTopology& topo, const Var<T>& view_features,
                    AttentionWeights* dump = nullptr) const;

  const StageConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

 private:
  StageConfig cfg_;
  std::string prefix_;
  FeaturePool<T> pool_;
  std::vector<GraphConvLayer<T>> layers_;
};

extern template class RefineStage<float>;
extern template class RefineStage<double>;

}  // namespace mvmesh
