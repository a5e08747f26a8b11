#pragma once

#include "mvmesh/diffmath/layers.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mvmesh {

enum class PoolKind { Attention, Simple, Stats };
enum class AttentionScale { SqrtViews, SqrtKeyDim };

std::string to_string(PoolKind k);
PoolKind parse_pool_kind(const std::string& s);
std::string to_string(AttentionScale s);
AttentionScale parse_attention_scale(const std::string& s);

struct PoolConfig {
  PoolKind kind = PoolKind::Attention;
  int heads = 5;
  int head_dim = 16;
  int pooled_dim = 64;
  AttentionScale scale = AttentionScale::SqrtViews;
  void validate() const;
};

/// Attention weights of one pooling call, [N,V,h] row-major.
struct AttentionWeights {
  int views = 0;
  int vertices = 0;
  int heads = 0;
  std::vector<double> values;

  double at(int view, int vertex, int head) const {
    return values[(static_cast<std::size_t>(view) * static_cast<std::size_t>(vertices) + static_cast<std::size_t>(vertex)) *
                      static_cast<std::size_t>(heads) +
                  static_cast<std::size_t>(head)];
  }
  /// Head-averaged weight of a view at a vertex; sums to 1 over views.
  double averaged(int view, int vertex) const;
};

/// "vertex view0 view1 ..." table of head-averaged weights.
void write_attention_table(std::ostream& out, const AttentionWeights& w);

/// Order-agnostic pooling of per-view vertex features [N,V,D] -> [V,D'].
///
/// Attention: the query is the view mean; per-head keys and values are
/// per-view projections; scores are scaled by sqrt(N) or sqrt(head_dim);
/// heads are concatenated and mixed by an output map to `pooled_dim`.
/// Simple: softmax over a learned per-view score, weighted sum (D' = D).
/// Stats: per-dimension mean, max and std over views (D' = 3D).
template <typename T>
class FeaturePool {
 public:
  FeaturePool(PoolConfig cfg, int input_dim, std::string prefix);

  void init(ParameterSet<T>& params, Rng& rng) const;
  Var<T> operator()(Bound<T>& b, const Var<T>& features, AttentionWeights* dump = nullptr) const;

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  const PoolConfig& config() const { return cfg_; }

 private:
  Var<T> attention(Bound<T>& b, const Var<T>& x, AttentionWeights* dump) const;
  Var<T> simple(Bound<T>& b, const Var<T>& x) const;
  Var<T> stats(const Var<T>& x) const;

  PoolConfig cfg_;
  int input_dim_;
  std::string prefix_;
};

extern template class FeaturePool<float>;
extern template class FeaturePool<double>;

}  // namespace mvmesh
