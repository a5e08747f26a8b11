#pragma once

#include "mvmesh/diffmath/layers.hpp"
#include "mvmesh/geomcore/camera.hpp"

#include <string>
#include <vector>

namespace mvmesh {

enum class ContrastiveMode { InputConcat, InputDiff, FeatureConcat, FeatureDiff, None };

std::string to_string(ContrastiveMode m);
ContrastiveMode parse_contrastive_mode(const std::string& s);

struct ContrastiveConfig {
  ContrastiveMode mode = ContrastiveMode::InputConcat;
  std::vector<int> channels{16, 32, 64, 96};
  std::vector<int> strides{1, 1, 2, 2};
  int hierarchy = 3;  // trailing stages whose outputs are sampled
  void validate() const;
};

/// Small conv stack over rendered and predicted depth, combined per mode.
/// Rendered depth always enters as a constant.
template <typename T>
class DepthFeatureExtractor {
 public:
  explicit DepthFeatureExtractor(ContrastiveConfig cfg = {}, std::string prefix = "contrast");

  void init(ParameterSet<T>& params, Rng& rng) const;

  /// Outputs of the trailing `hierarchy` stages for a [Cin,h,w] input.
  std::vector<Var<T>> pyramid(Bound<T>& b, const Var<T>& input) const;

  /// Both maps are [h,w] depth in meters, background 0.
  std::vector<Var<T>> extract(Bound<T>& b, const Tensor<T>& rendered, const Var<T>& predicted) const;

  /// Per-view feature length after sampling every pyramid level.
  int feature_dim() const;
  int input_channels() const { return cfg_.mode == ContrastiveMode::InputConcat ? 2 : 1; }
  const ContrastiveConfig& config() const { return cfg_; }

 private:
  ContrastiveConfig cfg_;
  std::string prefix_;
  std::vector<ConvLayer<T>> stages_;
};

/// Samples every level at each vertex's projection and concatenates the
/// levels: [V,3] -> [V, sum C_l]. `cam` is at the resolution of the first
/// level's input map; coordinates are rescaled per level. Vertices behind the
/// camera or outside the image get a zero row.
template <typename T>
Var<T> vertex_features(const Var<T>& vertices, const CameraView& cam, const std::vector<Var<T>>& pyramid);

extern template class DepthFeatureExtractor<float>;
extern template class DepthFeatureExtractor<double>;

}  // namespace mvmesh
