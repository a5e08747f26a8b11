#include "mvmesh/mvsdepth/mvs_net.hpp"

#include "mvmesh/error.hpp"

namespace mvmesh {

void DepthHypotheses::validate() const {
  if (count < 2) throw ValidationError("depth hypotheses: count must be >= 2");
  if (!(step > 0.0) || !std::isfinite(step)) throw ValidationError("depth hypotheses: step must be positive");
  if (!(d_min > 0.0) || !std::isfinite(d_min)) throw ValidationError("depth hypotheses: d_min must be positive");
}

template <typename T>
Var<T> variance_volume(const std::vector<Var<T>>& warped) {
  if (warped.size() < 2) throw ValidationError("cost volume: need at least 2 views");
  const Shape& shape = warped.front().shape();
  for (const auto& v : warped)
    if (v.shape() != shape) throw shape_error("variance_volume", v.shape(), shape);
  const Index n = static_cast<Index>(warped.size());
  const Index size = warped.front().size();
  VectorX<T> mean = VectorX<T>::Zero(size);
  for (const auto& v : warped) mean += v.value().values();
  mean /= static_cast<T>(n);
  VectorX<T> var = VectorX<T>::Zero(size);
  for (const auto& v : warped) var += (v.value().values() - mean).array().square().matrix();
  var /= static_cast<T>(n);
  return warped.front().tape().record(Tensor<T>(shape, std::move(var)), warped, [warped, mean, n](Tape<T>& t, Index self) {
    const VectorX<T>& g = t.grad(self).values();
    for (const auto& v : warped) {
      if (!v.requires_grad()) continue;
      t.accumulate(v, (g.array() * (v.value().values() - mean).array() * (T(2) / static_cast<T>(n))).matrix());
    }
  });
}

template <typename T>
Var<T> build_cost_volume(int ref, const std::vector<Var<T>>& features, const std::vector<CameraView>& cams,
                         const DepthHypotheses& hyps) {
  hyps.validate();
  if (features.size() < 2) throw ValidationError("cost volume: need at least 2 views");
  if (features.size() != cams.size()) throw ValidationError("cost volume: one camera per feature map required");
  if (ref < 0 || ref >= static_cast<int>(features.size())) throw ValidationError("cost volume: reference out of range");
  const Var<T>& rf = features[static_cast<std::size_t>(ref)];
  const Index C = rf.dim(0), h = rf.dim(1), w = rf.dim(2), D = hyps.count;
  auto& tape = rf.tape();
  std::vector<Var<T>> warped;
  warped.reserve(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    const Var<T>& f = features[j];
    if (f.shape() != rf.shape()) throw shape_error("cost volume features", f.shape(), rf.shape());
    Tensor<T> pts({D * h * w, 2});
    for (Index k = 0; k < D; ++k) {
      const Eigen::Matrix3d H = plane_homography(cams[j], cams[static_cast<std::size_t>(ref)], hyps.depth(static_cast<int>(k)));
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const Index p = (k * h + y) * w + x;
          if (static_cast<int>(j) == ref) {
            pts[2 * p] = static_cast<T>(x + 0.5);
            pts[2 * p + 1] = static_cast<T>(y + 0.5);
          } else {
            const Eigen::Vector2d s = apply_homography(H, Eigen::Vector2d(x + 0.5, y + 0.5));
            pts[2 * p] = static_cast<T>(s.x());
            pts[2 * p + 1] = static_cast<T>(s.y());
          }
        }
    }
    Var<T> s = sample_bilinear(f, tape.constant(std::move(pts)));  // [D*h*w, C]
    warped.push_back(reshape(transpose(s), {C, D, h, w}));
  }
  return variance_volume(warped);
}

template <typename T>
Var<T> soft_argmin(const Var<T>& probability, const DepthHypotheses& hyps) {
  if (probability.dim(0) != hyps.count) throw ValidationError("soft_argmin: hypothesis count mismatch");
  Shape rest(probability.shape().begin() + 1, probability.shape().end());
  const Index n = probability.size() / hyps.count;
  Tensor<T> d = hyps.tensor<T>().reshaped({1, hyps.count});
  Var<T> out = matmul(probability.tape().constant(std::move(d)), reshape(probability, {hyps.count, n}));
  return reshape(out, rest);
}

template <typename T>
MvsNet<T>::MvsNet(MvsConfig cfg, std::string prefix) : cfg_(std::move(cfg)), prefix_(std::move(prefix)) {
  if (cfg_.feature_channels.empty() || cfg_.feature_channels.size() != cfg_.feature_strides.size())
    throw ValidationError("mvs: feature channels and strides must be non-empty and equal length");
  Index total_stride = 1;
  for (int s : cfg_.feature_strides) total_stride *= s;
  if (total_stride != 4) throw ValidationError("mvs: feature strides must multiply to 4");
  if (cfg_.regularization_layers < 1 || cfg_.regularization_channels < 1)
    throw ValidationError("mvs: need at least one regularization layer");
  Index cin = 3;
  for (std::size_t i = 0; i < cfg_.feature_channels.size(); ++i) {
    const bool last = i + 1 == cfg_.feature_channels.size();
    features_.emplace_back(prefix_ + ".feat" + std::to_string(i),
                           ConvSpec{cin, cfg_.feature_channels[i], 3, cfg_.feature_strides[i], 1, 2, !last});
    cin = cfg_.feature_channels[i];
  }
  for (int i = 0; i < cfg_.regularization_layers; ++i) {
    const bool last = i + 1 == cfg_.regularization_layers;
    const Index cout = last ? 1 : cfg_.regularization_channels;
    regularization_.emplace_back(prefix_ + ".reg" + std::to_string(i), ConvSpec{cin, cout, 3, 1, 1, 3, !last});
    cin = cout;
  }
}

template <typename T>
void MvsNet<T>::init(ParameterSet<T>& params, Rng& rng) const {
  for (const auto& l : features_) l.init(params, rng);
  for (const auto& l : regularization_) l.init(params, rng);
}

template <typename T>
Var<T> MvsNet<T>::extract_features(Bound<T>& b, const Var<T>& image) const {
  if (image.value().rank() != 3 || image.dim(0) != 3)
    throw ShapeError("mvs: expected a [3,H,W] image, got " + shape_str(image.shape()));
  if (image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0)
    throw ValidationError("mvs: image height and width must be divisible by 4, got " + shape_str(image.shape()));
  Var<T> x = image;
  for (const auto& l : features_) x = l(b, x);
  return x;
}

template <typename T>
Var<T> MvsNet<T>::probability(Bound<T>& b, const Var<T>& volume) const {
  Var<T> x = volume;
  for (const auto& l : regularization_) x = l(b, x);
  const Index D = x.dim(1), n = x.dim(2) * x.dim(3);
  return softmax(-reshape(x, {D, n}), 0);
}

template <typename T>
Var<T> MvsNet<T>::regress(Bound<T>& b, const Var<T>& volume, const DepthHypotheses& hyps) const {
  return reshape(soft_argmin(probability(b, volume), hyps), {volume.dim(2), volume.dim(3)});
}

template <typename T>
std::vector<Var<T>> MvsNet<T>::predict_all_views(Bound<T>& b, const std::vector<Var<T>>& images,
                                                 const std::vector<CameraView>& cams,
                                                 const DepthHypotheses& hyps) const {
  if (images.size() < 2) throw ValidationError("mvs: need at least 2 views");
  if (images.size() != cams.size()) throw ValidationError("mvs: one camera per image required");
  std::vector<Var<T>> feats;
  std::vector<CameraView> fcams;
  for (std::size_t i = 0; i < images.size(); ++i) {
    feats.push_back(extract_features(b, images[i]));
    fcams.push_back(cams[i].scaled(static_cast<double>(feats.back().dim(2)) / static_cast<double>(images[i].dim(2))));
  }
  std::vector<Var<T>> depths;
  for (std::size_t r = 0; r < images.size(); ++r)
    depths.push_back(regress(b, build_cost_volume(static_cast<int>(r), feats, fcams, hyps), hyps));
  return depths;
}

template Var<float> variance_volume(const std::vector<Var<float>>&);
template Var<double> variance_volume(const std::vector<Var<double>>&);
template Var<float> build_cost_volume(int, const std::vector<Var<float>>&, const std::vector<CameraView>&,
                                      const DepthHypotheses&);
template Var<double> build_cost_volume(int, const std::vector<Var<double>>&, const std::vector<CameraView>&,
                                       const DepthHypotheses&);
template Var<float> soft_argmin(const Var<float>&, const DepthHypotheses&);
template Var<double> soft_argmin(const Var<double>&, const DepthHypotheses&);
template class MvsNet<float>;
template class MvsNet<double>;

}  // namespace mvmesh
