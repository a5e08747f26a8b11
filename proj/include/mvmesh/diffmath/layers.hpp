#pragma once

// Parameterised building blocks: a per-tape parameter binder, conv and
// linear layers.

#include "mvmesh/diffmath/conv.hpp"
#include "mvmesh/diffmath/init.hpp"
#include "mvmesh/diffmath/ops.hpp"
#include "mvmesh/diffmath/sampling.hpp"

#include <map>
#include <string>

namespace mvmesh {

/// Binds parameters of one set onto one tape, each at most once.
template <typename T>
class Bound {
 public:
  Bound(Tape<T>& tape, ParameterSet<T>& params) : tape_(&tape), params_(&params) {}

  Var<T> operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    Var<T> v = tape_->parameter(params_->at(name));
    cache_.emplace(name, v);
    return v;
  }

  Tape<T>& tape() const { return *tape_; }
  ParameterSet<T>& params() const { return *params_; }

 private:
  Tape<T>* tape_;
  ParameterSet<T>* params_;
  std::map<std::string, Var<T>> cache_;
};

struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel = 3;
  Index stride = 1;
  Index padding = 1;
  int dims = 2;
  bool relu = true;
};

/// Conv with bias and optional ReLU. Parameters: `<name>.w`, `<name>.b`.
template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(std::string name, ConvSpec spec) : name_(std::move(name)), spec_(spec) {}

  void init(ParameterSet<T>& params, Rng& rng) const {
    Shape ws{spec_.out_channels, spec_.in_channels, spec_.kernel, spec_.kernel};
    if (spec_.dims == 3) ws.push_back(spec_.kernel);
    params.add(name_ + ".w", he_normal<T>(ws, 0, rng, spec_.relu ? 1.0 : std::sqrt(0.5)));
    params.add(name_ + ".b", Tensor<T>({spec_.out_channels}));
  }

  Var<T> operator()(Bound<T>& b, const Var<T>& x) const {
    Var<T> y = conv(x, b(name_ + ".w"), b(name_ + ".b"), spec_.stride, spec_.padding);
    return spec_.relu ? relu(y) : y;
  }

  const ConvSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  ConvSpec spec_;
};

/// Row-vector affine map x[N,in] -> x W + b, W stored [in,out].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, Index in, Index out, bool bias = true)
      : name_(std::move(name)), in_(in), out_(out), bias_(bias) {}

  /// `stddev` < 0 selects a fan-in scaled normal.
  void init(ParameterSet<T>& params, Rng& rng, double stddev = -1.0) const {
    const double sd = stddev < 0.0 ? 1.0 / std::sqrt(static_cast<double>(std::max<Index>(in_, 1))) : stddev;
    params.add(name_ + ".w", normal_tensor<T>({in_, out_}, sd, rng));
    if (bias_) params.add(name_ + ".b", Tensor<T>({out_}));
  }

  Var<T> operator()(Bound<T>& b, const Var<T>& x) const {
    Var<T> y = matmul(x, b(name_ + ".w"));
    return bias_ ? y + b(name_ + ".b") : y;
  }

  Index in_features() const { return in_; }
  Index out_features() const { return out_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Index in_ = 0;
  Index out_ = 0;
  bool bias_ = true;
};

/// Resamples a [C,H,W] map to [C,h,w] by bilinear lookup at target pixel
/// centres. Identity when sizes already match.
template <typename T>
Var<T> resize_bilinear(const Var<T>& fmap, Index h, Index w) {
  const Index C = fmap.dim(0), H = fmap.dim(1), W = fmap.dim(2);
  if (H == h && W == w) return fmap;
  Tensor<T> pts({h * w, 2});
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      pts[2 * (y * w + x)] = static_cast<T>((x + 0.5) * static_cast<double>(W) / static_cast<double>(w));
      pts[2 * (y * w + x) + 1] = static_cast<T>((y + 0.5) * static_cast<double>(H) / static_cast<double>(h));
    }
  Var<T> s = sample_bilinear(fmap, fmap.tape().constant(std::move(pts)));  // [h*w, C]
  return reshape(transpose(s), {C, h, w});
}

}  // namespace mvmesh
