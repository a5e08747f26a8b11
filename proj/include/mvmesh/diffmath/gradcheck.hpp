#pragma once

// Central finite-difference checks of reverse-mode gradients (64-bit only).
// The numeric side uses forward values and nothing else, so it stays
// independent of every backward rule it checks.

#include "mvmesh/diffmath/init.hpp"
#include "mvmesh/diffmath/ops.hpp"

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

namespace mvmesh {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<input>[<flat index>]"
  Index checked = 0;
  bool passed(double tol) const { return max_rel_error <= tol; }
};

struct GradCheckOptions {
  double step = 1e-5;
  // Elements per tensor to probe; larger tensors are subsampled.
  Index max_entries = 24;
  // Denominator floor for the relative error, so exact zeros compare absolutely.
  double floor = 1e-6;
  std::uint64_t seed = 1234;
};

namespace detail {

inline double rel_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline std::vector<Index> probe_indices(Index n, Index max_entries, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (n > max_entries) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_entries));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

/// Projects an arbitrary-shape output onto a scalar with fixed random weights.
inline Tensor<double> projection_weights(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  Tensor<double> w(shape);
  for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng) * ((i % 2) ? -1.0 : 1.0);
  return w;
}

}  // namespace detail

using GradFunction = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// Checks d(f)/d(inputs) for a function of plain tensors. Non-scalar outputs
/// are reduced with a fixed random projection.
inline GradCheckResult check_gradients(const GradFunction& f, std::vector<Tensor<double>> inputs,
                                       const GradCheckOptions& opts = {}) {
  auto eval = [&](std::vector<Tensor<double>>& xs, bool grads, std::vector<Tensor<double>>* out_grads) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (auto& x : xs) vars.push_back(tape.variable(x));
    Var<double> y = f(tape, vars);
    const Tensor<double> w = detail::projection_weights(y.shape(), opts.seed);
    const double value = y.value().values().dot(w.values());
    if (grads) {
      tape.backward(y, w);
      for (auto& v : vars)
        out_grads->push_back(tape.has_grad(v.id()) ? tape.grad(v.id()) : Tensor<double>(v.shape()));
    }
    return value;
  };

  std::vector<Tensor<double>> analytic;
  eval(inputs, true, &analytic);

  GradCheckResult result;
  Rng rng(opts.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Index i : detail::probe_indices(inputs[k].size(), opts.max_entries, rng)) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + opts.step;
      const double up = eval(inputs, false, nullptr);
      inputs[k][i] = saved - opts.step;
      const double down = eval(inputs, false, nullptr);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double err = detail::rel_error(analytic[k][i], numeric, opts.floor);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = "input" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

using ParamLossFunction = std::function<Var<double>(Tape<double>&)>;

/// Checks gradients of a scalar loss with respect to registered parameters.
/// `prefix` restricts the check to parameters whose name starts with it.
inline GradCheckResult check_parameter_gradients(ParameterSet<double>& params, const ParamLossFunction& loss,
                                                 const std::string& prefix = "", const GradCheckOptions& opts = {}) {
  std::map<std::string, Tensor<double>> analytic;
  {
    Tape<double> tape;
    Var<double> y = loss(tape);
    tape.backward(y);
    for (auto& [p, g] : tape.parameter_grads()) analytic[p->name] = std::move(g);
  }
  auto eval = [&]() {
    Tape<double> tape;
    return loss(tape).value().item();
  };

  GradCheckResult result;
  Rng rng(opts.seed);
  for (auto& [name, p] : params) {
    if (name.rfind(prefix, 0) != 0 || p.frozen) continue;
    const auto it = analytic.find(name);
    for (Index i : detail::probe_indices(p.value.size(), opts.max_entries, rng)) {
      const double saved = p.value[i];
      p.value[i] = saved + opts.step;
      const double up = eval();
      p.value[i] = saved - opts.step;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double err = detail::rel_error(a, numeric, opts.floor);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace mvmesh
