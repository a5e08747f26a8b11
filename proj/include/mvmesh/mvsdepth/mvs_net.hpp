#pragma once

#include "mvmesh/diffmath/layers.hpp"
#include "mvmesh/geomcore/camera.hpp"

#include <string>
#include <vector>

namespace mvmesh {

/// Fronto-parallel sweep planes d_k = d_min + k * step, k < count.
struct DepthHypotheses {
  double d_min = 0.66;
  double step = 0.04;
  int count = 16;

  double depth(int k) const { return d_min + k * step; }
  double d_max() const { return depth(count - 1); }
  void validate() const;

  template <typename T>
  Tensor<T> tensor() const {
    Tensor<T> t({count});
    for (int k = 0; k < count; ++k) t[k] = static_cast<T>(depth(k));
    return t;
  }
};

struct MvsConfig {
  std::vector<int> feature_channels{8, 8, 8};
  std::vector<int> feature_strides{1, 2, 2};
  int regularization_channels = 8;
  int regularization_layers = 2;  // 3D convs, the last emits one cost channel
};

/// Per-channel variance across views of ref-aligned feature volumes, each
/// [C,D,h,w]. Order-independent up to rounding.
template <typename T>
Var<T> variance_volume(const std::vector<Var<T>>& warped);

/// Features of every view pulled into the `ref` view at each hypothesis plane
/// (bilinear, zeros outside), then aggregated by variance. `cams` are at
/// feature resolution. Returns [C,D,h,w].
template <typename T>
Var<T> build_cost_volume(int ref, const std::vector<Var<T>>& features, const std::vector<CameraView>& cams,
                         const DepthHypotheses& hyps);

/// Depth as the probability-weighted mean of hypotheses. `probability` is
/// [D, ...]; the result drops the first axis.
template <typename T>
Var<T> soft_argmin(const Var<T>& probability, const DepthHypotheses& hyps);

/// Shared feature net, per-view cost volumes, 3D regularization and soft
/// argmin. Depth maps come out at a quarter of the image size.
template <typename T>
class MvsNet {
 public:
  explicit MvsNet(MvsConfig cfg = {}, std::string prefix = "mvs");

  void init(ParameterSet<T>& params, Rng& rng) const;

  /// [3,H,W] -> [C,H/4,W/4]. H and W must be divisible by 4.
  Var<T> extract_features(Bound<T>& b, const Var<T>& image) const;
  /// [C,D,h,w] cost statistics -> [D,h*w] probability over hypotheses.
  Var<T> probability(Bound<T>& b, const Var<T>& volume) const;
  /// Regularize, softmax over hypotheses of the negated cost, soft argmin. -> [h,w].
  Var<T> regress(Bound<T>& b, const Var<T>& volume, const DepthHypotheses& hyps) const;
  /// One depth map per view, each view taking its turn as reference.
  /// `cams` are at image resolution.
  std::vector<Var<T>> predict_all_views(Bound<T>& b, const std::vector<Var<T>>& images,
                                        const std::vector<CameraView>& cams, const DepthHypotheses& hyps) const;

  const MvsConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  int feature_channels() const { return cfg_.feature_channels.back(); }

 private:
  MvsConfig cfg_;
  std::string prefix_;
  std::vector<ConvLayer<T>> features_;
  std::vector<ConvLayer<T>> regularization_;
};

extern template class MvsNet<float>;
extern template class MvsNet<double>;

}  // namespace mvmesh
