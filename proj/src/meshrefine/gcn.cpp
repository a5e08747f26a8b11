#include "mvmesh/meshrefine/gcn.hpp"

#include "mvmesh/error.hpp"

namespace mvmesh {

void StageConfig::validate() const {
  pool.validate();
  if (gcn_layers < 1 || gcn_hidden < 1) throw ValidationError("refine stage: need at least one graph conv layer");
  if (!(refine_init_scale >= 0.0)) throw ValidationError("refine stage: refine_init_scale must be >= 0");
}

template <typename T>
RefineStage<T>::RefineStage(StageConfig cfg, int view_feature_dim, std::string prefix)
    : cfg_(std::move(cfg)), prefix_(std::move(prefix)), pool_(cfg_.pool, view_feature_dim, prefix_ + ".pool") {
  cfg_.validate();
  Index in = pool_.output_dim() + 3;
  for (int i = 0; i < cfg_.gcn_layers; ++i) {
    layers_.emplace_back(prefix_ + ".gcn" + std::to_string(i), in, cfg_.gcn_hidden);
    in = cfg_.gcn_hidden;
  }
}

template <typename T>
void RefineStage<T>::init(ParameterSet<T>& params, Rng& rng) const {
  pool_.init(params, rng);
  for (const auto& l : layers_) l.init(params, rng);
  const Index in = cfg_.gcn_hidden + 3;
  params.add(prefix_ + ".wvert",
             normal_tensor<T>({in, 3}, cfg_.refine_init_scale / std::sqrt(static_cast<double>(in)), rng));
}

template <typename T>
Var<T> RefineStage<T>::operator()(Bound<T>& b, const Var<T>& vertices, const MeshTopology& topo,
                                  const Var<T>& view_features, AttentionWeights* dump) const {
  Var<T> f = concat(std::vector<Var<T>>{pool_(b, view_features, dump), vertices}, 1);
  for (const auto& l : layers_) f = l(b, f, topo);
  return vertex_refine(vertices, f, b(prefix_ + ".wvert"));
}

template class RefineStage<float>;
template class RefineStage<double>;

}  // namespace mvmesh
