#include "mvmesh/voxelgrid/voxel_net.hpp"

#include "mvmesh/error.hpp"

namespace mvmesh {

template <typename T>
VoxelNet<T>::VoxelNet(VoxelNetConfig cfg, std::string prefix) : cfg_(std::move(cfg)), prefix_(std::move(prefix)) {
  if (cfg_.encoder_channels.empty() || cfg_.encoder_channels.size() != cfg_.encoder_strides.size())
    throw ValidationError("voxel net: encoder channels and strides must be non-empty and equal length");
  if (cfg_.grid_resolution <= 0 || cfg_.head_channels <= 0) throw ValidationError("voxel net: sizes must be positive");
  Index cin = 3;
  for (std::size_t i = 0; i < cfg_.encoder_channels.size(); ++i) {
    const Index cout = cfg_.encoder_channels[i];
    encoder_.emplace_back(prefix_ + ".enc" + std::to_string(i), ConvSpec{cin, cout, 3, cfg_.encoder_strides[i], 1});
    cin = cout;
  }
  head_hidden_ = ConvLayer<T>(prefix_ + ".head0", ConvSpec{cin, cfg_.head_channels, 3, 1, 1});
  head_out_ = ConvLayer<T>(prefix_ + ".head1",
                           ConvSpec{cfg_.head_channels, cfg_.grid_resolution, 1, 1, 0, 2, false});
}

template <typename T>
void VoxelNet<T>::init(ParameterSet<T>& params, Rng& rng) const {
  for (const auto& l : encoder_) l.init(params, rng);
  head_hidden_.init(params, rng);
  head_out_.init(params, rng);
}

template <typename T>
Var<T> VoxelNet<T>::encode(Bound<T>& b, const Var<T>& image) const {
  if (image.value().rank() != 3 || image.dim(0) != 3)
    throw ShapeError("voxel net: expected a [3,H,W] image, got " + shape_str(image.shape()));
  Var<T> x = image;
  for (const auto& l : encoder_) x = l(b, x);
  return x;
}

template <typename T>
Var<T> VoxelNet<T>::head_logits(Bound<T>& b, const Var<T>& features) const {
  Var<T> x = head_out_(b, head_hidden_(b, features));
  return resize_bilinear(x, cfg_.grid_resolution, cfg_.grid_resolution);
}

template <typename T>
OccupancyGrid occupancy_from_tensor(const Tensor<T>& probabilities, const GridGeometry& geometry, GridFrame frame) {
  const Shape want{geometry.dims[2], geometry.dims[1], geometry.dims[0]};
  if (probabilities.shape() != want) throw shape_error("occupancy_from_tensor", probabilities.shape(), want);
  std::vector<double> p(static_cast<std::size_t>(probabilities.size()));
  for (Index i = 0; i < probabilities.size(); ++i) p[static_cast<std::size_t>(i)] = static_cast<double>(probabilities[i]);
  return OccupancyGrid(geometry, frame, std::move(p));
}

template class VoxelNet<float>;
template class VoxelNet<double>;
template OccupancyGrid occupancy_from_tensor(const Tensor<float>&, const GridGeometry&, GridFrame);
template OccupancyGrid occupancy_from_tensor(const Tensor<double>&, const GridGeometry&, GridFrame);

}  // namespace mvmesh
