#pragma once

#include "mvmesh/diffmath/tensor.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mvmesh {

/// A named learnable tensor. Names are dotted paths such as
/// "refine.stage1.gcn.conv0.w0" and double as checkpoint keys.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool frozen = false;
};

/// Ordered registry of parameters. Iteration order is the lexicographic name
/// order, which fixes checkpoint layout and gradient reduction order.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter<T>& add(const std::string& name, Tensor<T> init) {
    auto [it, inserted] = params_.try_emplace(name, Parameter<T>{name, std::move(init), false});
    if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Parameter<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }
  const Parameter<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Freeze or unfreeze every parameter whose name starts with `prefix`.
  void set_frozen(const std::string& prefix, bool frozen) {
    for (auto& [name, p] : params_)
      if (name.rfind(prefix, 0) == 0) p.frozen = frozen;
  }

  Index scalar_count() const {
    Index n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
  }

  /// Copies values from a set of another scalar type with identical names and shapes.
  template <typename U>
  void assign_from(const ParameterSet<U>& other) {
    for (auto& [name, p] : params_) {
      const auto& src = other.at(name);
      if (src.value.shape() != p.value.shape()) throw shape_error("assign " + name, src.value.shape(), p.value.shape());
      p.value = src.value.template cast<T>();
    }
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, Index id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  Index id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  Index dim(Index axis) const { return value().dim(axis); }
  Index size() const { return value().size(); }
  bool requires_grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  Index id_ = -1;
};

/// Linear record of executed differentiable ops. Backward visits nodes in
/// exact reverse recording order; gradients accumulate, so the gradient of a
/// sum of outputs equals the sum of per-output gradients.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, Index self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr, nullptr); }
  Var<T> variable(Tensor<T> value) { return push(std::move(value), true, nullptr, nullptr); }

  /// Leaf bound to a parameter. Frozen parameters enter as constants so no
  /// gradient work is spent on them.
  Var<T> parameter(Parameter<T>& p) { return push(p.value, !p.frozen, nullptr, &p); }

  /// Records an op output. The backward rule is dropped when no input needs a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr, nullptr);
  }
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr, nullptr);
  }

  const Tensor<T>& value(Index id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(Index id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Gradient buffer for a node; zero-initialised on first touch.
  Tensor<T>& grad(Index id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.grad.empty() && node.value.size() > 0) node.grad = Tensor<T>(node.value.shape());
    if (node.grad.shape() != node.value.shape()) node.grad = Tensor<T>(node.value.shape());
    return node.grad;
  }
  const Tensor<T>& grad(const Var<T>& v) { return grad(v.id()); }
  bool has_grad(Index id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

  /// Adds `g` into the gradient of `target` if it participates in differentiation.
  void accumulate(const Var<T>& target, const VectorX<T>& g) {
    if (!target.requires_grad()) return;
    auto& buf = grad(target.id());
    buf.values() += g;
  }

  /// Reverse sweep seeded with d(root)/d(root) = 1; root must be a scalar.
  void backward(const Var<T>& root) {
    if (root.size() != 1) throw ShapeError("backward() needs a scalar root, got " + shape_str(root.shape()));
    backward(root, Tensor<T>(root.shape(), T(1)));
  }

  void backward(const Var<T>& root, const Tensor<T>& seed) {
    if (seed.shape() != root.shape()) throw shape_error("backward seed", seed.shape(), root.shape());
    if (!root.requires_grad()) return;
    grad(root.id()).values() += seed.values();
    for (Index id = root.id(); id >= 0; --id) {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.backward || node.grad.empty()) continue;
      node.backward(*this, id);
    }
  }

  /// Gradients gathered per parameter leaf, in recording order. One
  /// parameter may be bound more than once; those grads are summed.
  std::vector<std::pair<Parameter<T>*, Tensor<T>>> parameter_grads() const {
    std::map<std::string, std::pair<Parameter<T>*, Tensor<T>>> by_name;
    for (const auto& node : nodes_) {
      if (!node.param || !node.requires_grad) continue;
      auto [it, inserted] = by_name.try_emplace(node.param->name, node.param, Tensor<T>(node.value.shape()));
      if (!node.grad.empty()) it->second.second.values() += node.grad.values();
    }
    std::vector<std::pair<Parameter<T>*, Tensor<T>>> out;
    out.reserve(by_name.size());
    for (auto& [name, entry] : by_name) out.push_back(std::move(entry));
    return out;
  }

  Index node_count() const { return static_cast<Index>(nodes_.size()); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, Backward backward, Parameter<T>* param) {
    nodes_.push_back(Node{std::move(value), Tensor<T>(), requires_grad, std::move(backward), param});
    return Var<T>(this, static_cast<Index>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

}  // namespace mvmesh
