#pragma once

#include "mvmesh/diffmath/tape.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace mvmesh {

/// Raised when a gradient contains NaN or Inf. Names the offending parameter.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction.
template <typename T>
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  struct Moments {
    Tensor<T> m;
    Tensor<T> v;
  };

  Adam() = default;
  explicit Adam(Options opts) : opts_(opts) {}

  /// Applies one update to every non-frozen parameter that has an entry in
  /// `grads`. Throws before touching any parameter if a gradient is non-finite.
  void step(ParameterSet<T>& params, const std::map<std::string, Tensor<T>>& grads) {
    for (const auto& [name, g] : grads) {
      if (!g.values().allFinite()) throw NonFiniteError("non-finite gradient for parameter " + name);
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
    for (auto& [name, p] : params) {
      if (p.frozen) continue;
      auto git = grads.find(name);
      if (git == grads.end()) continue;
      const Tensor<T>& g = git->second;
      if (g.shape() != p.value.shape()) throw shape_error("adam " + name, g.shape(), p.value.shape());
      auto& mom = moments_[name];
      if (mom.m.empty()) {
        mom.m = Tensor<T>(p.value.shape());
        mom.v = Tensor<T>(p.value.shape());
      }
      const T b1 = static_cast<T>(opts_.beta1), b2 = static_cast<T>(opts_.beta2);
      mom.m.values() = b1 * mom.m.values() + (T(1) - b1) * g.values();
      mom.v.values() = b2 * mom.v.values() + (T(1) - b2) * g.values().cwiseAbs2();
      const T lr = static_cast<T>(opts_.lr / c1);
      const T denom_scale = static_cast<T>(1.0 / std::sqrt(c2));
      const T eps = static_cast<T>(opts_.eps);
      p.value.values().array() -=
          lr * mom.m.values().array() / (mom.v.values().array().sqrt() * denom_scale + eps);
    }
  }

  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }
  const Options& options() const { return opts_; }
  void set_lr(double lr) { opts_.lr = lr; }
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  Options opts_;
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace mvmesh
