#include "mvmesh/featfuse/pooling.hpp"

#include "mvmesh/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace mvmesh {

std::string to_string(PoolKind k) {
  switch (k) {
    case PoolKind::Attention: return "attention";
    case PoolKind::Simple: return "simple";
    case PoolKind::Stats: return "stats";
  }
  return "?";
}

PoolKind parse_pool_kind(const std::string& s) {
  if (s == "attention") return PoolKind::Attention;
  if (s == "simple") return PoolKind::Simple;
  if (s == "stats") return PoolKind::Stats;
  throw ValidationError("unknown pooling '" + s + "' (expected attention, simple or stats)");
}

std::string to_string(AttentionScale s) { return s == AttentionScale::SqrtViews ? "sqrt-views" : "sqrt-key-dim"; }

AttentionScale parse_attention_scale(const std::string& s) {
  if (s == "sqrt-views") return AttentionScale::SqrtViews;
  if (s == "sqrt-key-dim") return AttentionScale::SqrtKeyDim;
  throw ValidationError("unknown attention scale '" + s + "' (expected sqrt-views or sqrt-key-dim)");
}

void PoolConfig::validate() const {
  if (heads < 1 || head_dim < 1 || pooled_dim < 1) throw ValidationError("pooling: heads and dims must be >= 1");
}

double AttentionWeights::averaged(int view, int vertex) const {
  double s = 0.0;
  for (int h = 0; h < heads; ++h) s += at(view, vertex, h);
  return s / heads;
}

void write_attention_table(std::ostream& out, const AttentionWeights& w) {
  out << "vertex";
  for (int n = 0; n < w.views; ++n) out << " view" << n;
  out << '\n';
  char buf[32];
  for (int v = 0; v < w.vertices; ++v) {
    out << v;
    for (int n = 0; n < w.views; ++n) {
      std::snprintf(buf, sizeof buf, " %.6f", w.averaged(n, v));
      out << buf;
    }
    out << '\n';
  }
}

template <typename T>
FeaturePool<T>::FeaturePool(PoolConfig cfg, int input_dim, std::string prefix)
    : cfg_(cfg), input_dim_(input_dim), prefix_(std::move(prefix)) {
  cfg_.validate();
  if (input_dim_ < 1) throw ValidationError("pooling: input dim must be >= 1");
}

template <typename T>
int FeaturePool<T>::output_dim() const {
  switch (cfg_.kind) {
    case PoolKind::Attention: return cfg_.pooled_dim;
    case PoolKind::Simple: return input_dim_;
    case PoolKind::Stats: return 3 * input_dim_;
  }
  return 0;
}

template <typename T>
void FeaturePool<T>::init(ParameterSet<T>& params, Rng& rng) const {
  const Index D = input_dim_, hd = static_cast<Index>(cfg_.heads) * cfg_.head_dim;
  switch (cfg_.kind) {
    case PoolKind::Attention:
      Linear<T>(prefix_ + ".wq", D, hd, false).init(params, rng);
      Linear<T>(prefix_ + ".wk", D, hd, false).init(params, rng);
      Linear<T>(prefix_ + ".wv", D, hd, false).init(params, rng);
      Linear<T>(prefix_ + ".wo", hd, cfg_.pooled_dim).init(params, rng);
      break;
    case PoolKind::Simple: Linear<T>(prefix_ + ".score", D, 1).init(params, rng); break;
    case PoolKind::Stats: break;
  }
}

template <typename T>
Var<T> FeaturePool<T>::operator()(Bound<T>& b, const Var<T>& features, AttentionWeights* dump) const {
  if (features.value().rank() != 3 || features.dim(2) != input_dim_)
    throw ShapeError("pooling: expected [N,V," + std::to_string(input_dim_) + "], got " + shape_str(features.shape()));
  if (features.dim(0) < 1) throw ValidationError("pooling: need at least one view");
  switch (cfg_.kind) {
    case PoolKind::Attention: return attention(b, features, dump);
    case PoolKind::Simple: return simple(b, features);
    case PoolKind::Stats: return stats(features);
  }
  throw ValidationError("pooling: unknown kind");
}

template <typename T>
Var<T> FeaturePool<T>::attention(Bound<T>& b, const Var<T>& x, AttentionWeights* dump) const {
  const Index N = x.dim(0), V = x.dim(1), D = x.dim(2), h = cfg_.heads, dk = cfg_.head_dim;
  Var<T> flat = reshape(x, {N * V, D});
  Var<T> q = reshape(Linear<T>(prefix_ + ".wq", D, h * dk, false)(b, mean(x, 0)), {1, V, h, dk});
  Var<T> k = reshape(Linear<T>(prefix_ + ".wk", D, h * dk, false)(b, flat), {N, V, h, dk});
  Var<T> v = reshape(Linear<T>(prefix_ + ".wv", D, h * dk, false)(b, flat), {N, V, h, dk});
  const double scale = cfg_.scale == AttentionScale::SqrtViews ? std::sqrt(static_cast<double>(N))
                                                               : std::sqrt(static_cast<double>(dk));
  Var<T> scores = sum(q * k, 3) * static_cast<T>(1.0 / scale);  // [N,V,h]
  Var<T> a = softmax(scores, 0);
  if (dump) {
    dump->views = static_cast<int>(N);
    dump->vertices = static_cast<int>(V);
    dump->heads = static_cast<int>(h);
    dump->values.assign(static_cast<std::size_t>(a.size()), 0.0);
    for (Index i = 0; i < a.size(); ++i) dump->values[static_cast<std::size_t>(i)] = static_cast<double>(a.value()[i]);
  }
  Var<T> heads = sum(reshape(a, {N, V, h, 1}) * v, 0);  // [V,h,dk]
  return Linear<T>(prefix_ + ".wo", h * dk, cfg_.pooled_dim)(b, reshape(heads, {V, h * dk}));
}

template <typename T>
Var<T> FeaturePool<T>::simple(Bound<T>& b, const Var<T>& x) const {
  const Index N = x.dim(0), V = x.dim(1), D = x.dim(2);
  Var<T> s = reshape(Linear<T>(prefix_ + ".score", D, 1)(b, reshape(x, {N * V, D})), {N, V, 1});
  return sum(softmax(s, 0) * x, 0);
}

template <typename T>
Var<T> FeaturePool<T>::stats(const Var<T>& x) const {
  constexpr double kEps = 1e-12;
  Var<T> mu = mean(x, 0);
  Var<T> var = mean(square(x - reshape(mu, {1, x.dim(1), x.dim(2)})), 0);
  Var<T> sd = sqrt(var + static_cast<T>(kEps)) + static_cast<T>(-std::sqrt(kEps));
  return concat(std::vector<Var<T>>{mu, max(x, 0), sd}, 1);
}

template class FeaturePool<float>;
template class FeaturePool<double>;

}  // namespace mvmesh
