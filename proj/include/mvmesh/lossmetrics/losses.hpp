#pragma once

#include "mvmesh/diffmath/ops.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/mesh.hpp"
#include "mvmesh/lossmetrics/nearest.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace mvmesh {

struct LossWeights {
  double chamfer = 1.0;
  double normal = 1.6e-4;
  double edge = 0.0;
  double depth = 0.1;
  double contrastive = 0.001;
  double voxel = 1.0;

  static LossWeights best() { return {}; }
  static LossWeights pretty() {
    LossWeights w;
    w.edge = 0.2;
    return w;
  }
  void validate() const {
    for (double v : {chamfer, normal, edge, depth, contrastive, voxel})
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
  }
};

inline constexpr double kBerhuScale = 0.2;
inline constexpr double kBerhuFloor = 1e-6;

template <typename T>
PointMatrix point_matrix(const Tensor<T>& t) {
  if (t.rank() != 2 || t.dim(1) != 3) throw ShapeError("expected an [N,3] point tensor, got " + shape_str(t.shape()));
  PointMatrix m(t.dim(0), 3);
  for (Index i = 0; i < t.size(); ++i) m.data()[i] = static_cast<double>(t[i]);
  return m;
}

namespace detail {

inline std::vector<Index> to_index(const std::vector<int>& v) { return std::vector<Index>(v.begin(), v.end()); }

}  // namespace detail

/// Nearest-neighbour pairs in both directions: first[i] is the index in Q
/// closest to P_i, second[j] the index in P closest to Q_j.
struct NearestPairs {
  std::vector<int> p_to_q;
  std::vector<int> q_to_p;
};

template <typename T>
NearestPairs nearest_pairs(const Var<T>& P, const Var<T>& Q) {
  if (P.dim(0) == 0 || Q.dim(0) == 0) throw ValidationError("chamfer: empty point set");
  const PointMatrix pm = point_matrix(P.value()), qm = point_matrix(Q.value());
  return {nearest_indices(pm, qm), nearest_indices(qm, pm)};
}

/// Mean squared nearest-neighbour distance P->Q plus Q->P.
template <typename T>
Var<T> chamfer(const Var<T>& P, const Var<T>& Q, const NearestPairs& pairs) {
  Var<T> dp = P - gather_rows(Q, detail::to_index(pairs.p_to_q));
  Var<T> dq = Q - gather_rows(P, detail::to_index(pairs.q_to_p));
  return mean(sum(square(dp), 1)) + mean(sum(square(dq), 1));
}

template <typename T>
Var<T> chamfer(const Var<T>& P, const Var<T>& Q) {
  return chamfer(P, Q, nearest_pairs(P, Q));
}

/// Negative mean |u_p . u_q| over the chamfer pairs, both directions; in [-2, 0].
template <typename T>
Var<T> normal_loss(const Var<T>& nP, const Var<T>& nQ, const NearestPairs& pairs) {
  Var<T> a = abs(sum(nP * gather_rows(nQ, detail::to_index(pairs.p_to_q)), 1));
  Var<T> b = abs(sum(nQ * gather_rows(nP, detail::to_index(pairs.q_to_p)), 1));
  return -(mean(a) + mean(b));
}

template <typename T>
Var<T> normal_loss(const Var<T>& P, const Var<T>& nP, const Var<T>& Q, const Var<T>& nQ) {
  return normal_loss(nP, nQ, nearest_pairs(P, Q));
}

/// Mean squared length over unique undirected edges.
template <typename T>
Var<T> edge_loss(const Var<T>& vertices, const std::vector<Edge>& edges) {
  if (edges.empty()) throw ValidationError("edge_loss: mesh has no edges");
  std::vector<Index> a, b;
  a.reserve(edges.size());
  b.reserve(edges.size());
  for (const auto& e : edges) {
    a.push_back(e[0]);
    b.push_back(e[1]);
  }
  return mean(sum(square(gather_rows(vertices, a) - gather_rows(vertices, b)), 1));
}

inline double berhu_value(double x, double c) {
  const double a = std::abs(x);
  return a <= c ? a : (x * x + c * c) / (2.0 * c);
}

/// BerHu of residuals averaged over entries where `valid` is nonzero.
template <typename T>
Var<T> berhu(const Var<T>& residuals, const Tensor<T>& valid, double c) {
  if (!(c > 0.0)) throw ValidationError("berhu: threshold c must be positive");
  if (valid.shape() != residuals.shape()) throw shape_error("berhu mask", valid.shape(), residuals.shape());
  const Tensor<T>& r = residuals.value();
  Index count = 0;
  double total = 0.0;
  for (Index i = 0; i < r.size(); ++i)
    if (valid[i] != T(0)) {
      ++count;
      total += berhu_value(static_cast<double>(r[i]), c);
    }
  if (count == 0) throw ValidationError("berhu: no valid pixels");
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(count)));
  return residuals.tape().record(std::move(out), {residuals}, [residuals, valid, c, count](Tape<T>& t, Index self) {
    const T g = t.grad(self)[0] / static_cast<T>(count);
    const Tensor<T>& r = residuals.value();
    VectorX<T> gr = VectorX<T>::Zero(r.size());
    for (Index i = 0; i < r.size(); ++i) {
      if (valid[i] == T(0)) continue;
      const double x = static_cast<double>(r[i]);
      const double d = std::abs(x) <= c ? (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0)) : x / c;
      gr[i] = g * static_cast<T>(d);
    }
    t.accumulate(residuals, gr);
  });
}

/// Pixels where both maps hold a depth (background sentinel is 0).
template <typename T>
Tensor<T> depth_valid_mask(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw shape_error("depth mask", a.shape(), b.shape());
  Tensor<T> m(a.shape());
  for (Index i = 0; i < a.size(); ++i) m[i] = (a[i] != T(0) && b[i] != T(0)) ? T(1) : T(0);
  return m;
}

/// c = max(0.2 * max|r| over valid entries, 1e-6); a constant of the graph.
template <typename T>
double adaptive_berhu_c(const Tensor<T>& residuals, const Tensor<T>& valid) {
  double m = 0.0;
  for (Index i = 0; i < residuals.size(); ++i)
    if (valid[i] != T(0)) m = std::max(m, std::abs(static_cast<double>(residuals[i])));
  return std::max(kBerhuScale * m, kBerhuFloor);
}

/// BerHu between two depth maps over pixels valid in both, adaptive c.
template <typename T>
Var<T> depth_berhu(const Var<T>& predicted, const Var<T>& target) {
  const Tensor<T> valid = depth_valid_mask(predicted.value(), target.value());
  Var<T> r = predicted - target;
  return berhu(r, valid, adaptive_berhu_c(r.value(), valid));
}

/// Standard binary cross-entropy, predictions clamped to [eps, 1-eps].
template <typename T>
Var<T> voxel_bce(const Var<T>& probabilities, const Tensor<T>& target, double eps = 1e-6) {
  if (probabilities.shape() != target.shape()) throw shape_error("voxel_bce", probabilities.shape(), target.shape());
  auto& tape = probabilities.tape();
  Var<T> p = clamp(probabilities, static_cast<T>(eps), static_cast<T>(1.0 - eps));
  Var<T> y = tape.constant(target);
  Tensor<T> one_minus(target.shape());
  for (Index i = 0; i < target.size(); ++i) one_minus[i] = T(1) - target[i];
  Var<T> ny = tape.constant(std::move(one_minus));
  Var<T> q = affine(p, T(-1), T(1));
  return -mean(y * log(p) + ny * log(q));
}

/// Named components of one training objective, all scalar.
template <typename T>
struct LossTerms {
  std::vector<Var<T>> chamfer;  // one per refinement stage
  std::vector<Var<T>> normal;
  std::vector<Var<T>> edge;
  std::vector<Var<T>> contrastive;
  std::vector<Var<T>> depth;
  std::vector<Var<T>> voxel;
};

/// Weighted sum. Per-stage mesh terms are summed (or averaged with
/// `average_stages`); depth and voxel terms are averaged over their entries.
template <typename T>
Var<T> total_loss(Tape<T>& tape, const LossTerms<T>& terms, const LossWeights& w, bool average_stages = false) {
  w.validate();
  Var<T> total = tape.constant(Tensor<T>::scalar(T(0)));
  auto add = [&](const std::vector<Var<T>>& parts, double weight, bool stage_term) {
    if (parts.empty() || weight == 0.0) return;
    Var<T> s = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) s = s + parts[i];
    double scale = weight;
    if (!stage_term || average_stages) scale /= static_cast<double>(parts.size());
    total = total + s * static_cast<T>(scale);
  };
  add(terms.chamfer, w.chamfer, true);
  add(terms.normal, w.normal, true);
  add(terms.edge, w.edge, true);
  add(terms.contrastive, w.contrastive, true);
  add(terms.depth, w.depth, false);
  add(terms.voxel, w.voxel, false);
  return total;
}

}  // namespace mvmesh
