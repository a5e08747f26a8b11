#pragma once

#include "mvmesh/diffmath/layers.hpp"
#include "mvmesh/voxelgrid/grid.hpp"

#include <string>
#include <vector>

namespace mvmesh {

struct VoxelNetConfig {
  int grid_resolution = 16;
  std::vector<int> encoder_channels{8, 16, 32};
  std::vector<int> encoder_strides{2, 2, 1};
  int head_channels = 32;
};

/// Shared image encoder plus a fully convolutional voxel head. One parameter
/// set serves every view. The head emits D channels over a DxD map; channel
/// z, row y, column x is voxel (x,y,z) of the camera-local grid.
template <typename T>
class VoxelNet {
 public:
  explicit VoxelNet(VoxelNetConfig cfg = {}, std::string prefix = "voxel");

  void init(ParameterSet<T>& params, Rng& rng) const;

  /// [3,H,W] image -> [C,h,w] features.
  Var<T> encode(Bound<T>& b, const Var<T>& image) const;
  /// Features -> [D,D,D] occupancy logits.
  Var<T> head_logits(Bound<T>& b, const Var<T>& features) const;
  /// Features -> [D,D,D] sigmoid occupancies.
  Var<T> voxel_head(Bound<T>& b, const Var<T>& features) const { return sigmoid(head_logits(b, features)); }
  Var<T> logits(Bound<T>& b, const Var<T>& image) const { return head_logits(b, encode(b, image)); }

  const VoxelNetConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }

 private:
  VoxelNetConfig cfg_;
  std::string prefix_;
  std::vector<ConvLayer<T>> encoder_;
  ConvLayer<T> head_hidden_;
  ConvLayer<T> head_out_;
};

/// Probability grid from an occupancy tensor laid out [Dz,Dy,Dx].
template <typename T>
OccupancyGrid occupancy_from_tensor(const Tensor<T>& probabilities, const GridGeometry& geometry, GridFrame frame);

extern template class VoxelNet<float>;
extern template class VoxelNet<double>;

}  // namespace mvmesh
