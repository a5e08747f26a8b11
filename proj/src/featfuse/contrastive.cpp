#include "mvmesh/featfuse/contrastive.hpp"

#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/geometry_ops.hpp"

namespace mvmesh {

namespace {

constexpr std::pair<ContrastiveMode, const char*> kModeNames[] = {
    {ContrastiveMode::InputConcat, "input-concat"},   {ContrastiveMode::InputDiff, "input-diff"},
    {ContrastiveMode::FeatureConcat, "feature-concat"}, {ContrastiveMode::FeatureDiff, "feature-diff"},
    {ContrastiveMode::None, "none"},
};

}  // namespace

std::string to_string(ContrastiveMode m) {
  for (const auto& [mode, name] : kModeNames)
    if (mode == m) return name;
  return "?";
}

ContrastiveMode parse_contrastive_mode(const std::string& s) {
  for (const auto& [mode, name] : kModeNames)
    if (s == name) return mode;
  throw ValidationError("unknown contrastive mode '" + s +
                        "' (expected input-concat, input-diff, feature-concat, feature-diff or none)");
}

void ContrastiveConfig::validate() const {
  if (channels.empty() || channels.size() != strides.size())
    throw ValidationError("contrastive: channels and strides must be non-empty and equal length");
  if (hierarchy < 1 || hierarchy > static_cast<int>(channels.size()))
    throw ValidationError("contrastive: hierarchy must be between 1 and the stage count");
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i] < 1 || strides[i] < 1) throw ValidationError("contrastive: channels and strides must be positive");
}

template <typename T>
DepthFeatureExtractor<T>::DepthFeatureExtractor(ContrastiveConfig cfg, std::string prefix)
    : cfg_(std::move(cfg)), prefix_(std::move(prefix)) {
  cfg_.validate();
  Index cin = input_channels();
  for (std::size_t i = 0; i < cfg_.channels.size(); ++i) {
    stages_.emplace_back(prefix_ + ".stage" + std::to_string(i), ConvSpec{cin, cfg_.channels[i], 3, cfg_.strides[i], 1});
    cin = cfg_.channels[i];
  }
}

template <typename T>
void DepthFeatureExtractor<T>::init(ParameterSet<T>& params, Rng& rng) const {
  for (const auto& s : stages_) s.init(params, rng);
}

template <typename T>
std::vector<Var<T>> DepthFeatureExtractor<T>::pyramid(Bound<T>& b, const Var<T>& input) const {
  if (input.value().rank() != 3 || input.dim(0) != input_channels())
    throw ShapeError("contrastive extractor: bad input shape " + shape_str(input.shape()));
  std::vector<Var<T>> out;
  Var<T> x = input;
  const std::size_t first = stages_.size() - static_cast<std::size_t>(cfg_.hierarchy);
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    x = stages_[i](b, x);
    if (i >= first) out.push_back(x);
  }
  return out;
}

template <typename T>
std::vector<Var<T>> DepthFeatureExtractor<T>::extract(Bound<T>& b, const Tensor<T>& rendered, const Var<T>& predicted) const {
  if (rendered.shape() != predicted.shape() || rendered.rank() != 2)
    throw ValidationError("contrastive: rendered " + shape_str(rendered.shape()) + " and predicted " +
                          shape_str(predicted.shape()) + " depth maps must be equal-size [h,w]");
  auto& tape = predicted.tape();
  const Index h = rendered.dim(0), w = rendered.dim(1);
  Var<T> r = tape.constant(rendered.reshaped({1, h, w}));
  Var<T> p = reshape(predicted, {1, h, w});
  switch (cfg_.mode) {
    case ContrastiveMode::InputConcat: return pyramid(b, concat(std::vector<Var<T>>{r, p}, 0));
    case ContrastiveMode::InputDiff: return pyramid(b, r - p);
    case ContrastiveMode::None: return pyramid(b, p);
    case ContrastiveMode::FeatureConcat:
    case ContrastiveMode::FeatureDiff: {
      auto fr = pyramid(b, r), fp = pyramid(b, p);
      std::vector<Var<T>> out;
      for (std::size_t i = 0; i < fr.size(); ++i)
        out.push_back(cfg_.mode == ContrastiveMode::FeatureDiff ? fr[i] - fp[i]
                                                                : concat(std::vector<Var<T>>{fr[i], fp[i]}, 0));
      return out;
    }
  }
  throw ValidationError("contrastive: unknown mode");
}

template <typename T>
int DepthFeatureExtractor<T>::feature_dim() const {
  int d = 0;
  for (std::size_t i = cfg_.channels.size() - static_cast<std::size_t>(cfg_.hierarchy); i < cfg_.channels.size(); ++i)
    d += cfg_.channels[i];
  return cfg_.mode == ContrastiveMode::FeatureConcat ? 2 * d : d;
}

template <typename T>
Var<T> vertex_features(const Var<T>& vertices, const CameraView& cam, const std::vector<Var<T>>& pyramid) {
  if (pyramid.empty()) throw ValidationError("vertex_features: empty pyramid");
  auto& tape = vertices.tape();
  const Index n = vertices.dim(0);
  Var<T> proj = project_points(vertices, cam);
  Tensor<T> mask({n, 1});
  for (Index i = 0; i < n; ++i) {
    const double u = static_cast<double>(proj.value()[3 * i]), v = static_cast<double>(proj.value()[3 * i + 1]);
    const double z = static_cast<double>(proj.value()[3 * i + 2]);
    const bool visible = z > CameraView::kMinDepth && u >= 0.0 && u < cam.width() && v >= 0.0 && v < cam.height();
    mask[i] = visible ? T(1) : T(0);
  }
  Var<T> uv = slice(proj, 1, 0, 2);
  std::vector<Var<T>> parts;
  for (const auto& level : pyramid) {
    const double scale = static_cast<double>(level.dim(2)) / static_cast<double>(cam.width());
    parts.push_back(sample_bilinear(level, scale == 1.0 ? uv : uv * static_cast<T>(scale)));
  }
  Var<T> f = parts.size() == 1 ? parts.front() : concat(parts, 1);
  return f * tape.constant(std::move(mask));
}

template class DepthFeatureExtractor<float>;
template class DepthFeatureExtractor<double>;
template Var<float> vertex_features(const Var<float>&, const CameraView&, const std::vector<Var<float>>&);
template Var<double> vertex_features(const Var<double>&, const CameraView&, const std::vector<Var<double>>&);

}  // namespace mvmesh
