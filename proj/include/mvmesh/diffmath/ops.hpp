#pragma once

// Differentiable tensor ops. Every op computes its forward value eagerly and
// records a backward rule on the tape that owns its inputs.

#include "mvmesh/diffmath/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mvmesh {

/// Inputs to log and divisors are clamped to this magnitude.
inline constexpr double kClampMagnitude = 1e-12;

enum class OpKind { Add, Sub, Mul, Div, Relu, Tanh, Sigmoid, Log, Exp, Abs, Square, Sqrt };

namespace detail {

template <typename T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
  return a.tape();
}

template <typename T>
T clamp_magnitude(T x) {
  const T lo = static_cast<T>(kClampMagnitude);
  if (x >= lo || x <= -lo) return x;
  return x < T(0) ? -lo : lo;
}

template <typename T>
VectorX<T> reduce_to(const VectorX<T>& g, const std::vector<Index>& map, Index in_size) {
  VectorX<T> out = VectorX<T>::Zero(in_size);
  for (Index i = 0; i < g.size(); ++i) out[map[static_cast<std::size_t>(i)]] += g[i];
  return out;
}

inline Index normalize_axis(Index axis, Index rank, const char* op) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError(std::string(op) + ": axis out of range");
  return axis;
}

/// Splits a shape around `axis` into (outer, axis, inner) extents.
inline void split_extents(const Shape& s, Index axis, Index& outer, Index& mid, Index& inner) {
  outer = 1;
  inner = 1;
  for (Index i = 0; i < axis; ++i) outer *= s[i];
  mid = s[axis];
  for (Index i = axis + 1; i < static_cast<Index>(s.size()); ++i) inner *= s[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary elementwise ops with broadcasting

template <typename T>
Var<T> binary(OpKind kind, const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b, "binary");
  const char* name = kind == OpKind::Add ? "add" : kind == OpKind::Sub ? "sub" : kind == OpKind::Mul ? "mul" : "div";
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const Shape out_shape = broadcast_shapes(av.shape(), bv.shape(), name);
  const Index n = shape_size(out_shape);
  const bool a_full = av.shape() == out_shape;
  const bool b_full = bv.shape() == out_shape;
  std::vector<Index> amap = a_full ? std::vector<Index>() : broadcast_index_map(av.shape(), out_shape);
  std::vector<Index> bmap = b_full ? std::vector<Index>() : broadcast_index_map(bv.shape(), out_shape);
  auto ai = [&amap, a_full](Index i) { return a_full ? i : amap[static_cast<std::size_t>(i)]; };
  auto bi = [&bmap, b_full](Index i) { return b_full ? i : bmap[static_cast<std::size_t>(i)]; };

  Tensor<T> out(out_shape);
  for (Index i = 0; i < n; ++i) {
    const T x = av[ai(i)];
    const T y = bv[bi(i)];
    switch (kind) {
      case OpKind::Add: out[i] = x + y; break;
      case OpKind::Sub: out[i] = x - y; break;
      case OpKind::Mul: out[i] = x * y; break;
      case OpKind::Div: out[i] = x / detail::clamp_magnitude(y); break;
      default: throw std::invalid_argument("binary: not a binary op kind");
    }
  }

  return tape.record(std::move(out), {a, b},
                     [a, b, kind, amap = std::move(amap), bmap = std::move(bmap), a_full, b_full](Tape<T>& t, Index self) {
                       const VectorX<T>& g = t.grad(self).values();
                       const Tensor<T>& av = a.value();
                       const Tensor<T>& bv = b.value();
                       const Index n = g.size();
                       auto ai = [&](Index i) { return a_full ? i : amap[static_cast<std::size_t>(i)]; };
                       auto bi = [&](Index i) { return b_full ? i : bmap[static_cast<std::size_t>(i)]; };
                       VectorX<T> ga(n), gb(n);
                       for (Index i = 0; i < n; ++i) {
                         const T x = av[ai(i)];
                         const T y = bv[bi(i)];
                         switch (kind) {
                           case OpKind::Add: ga[i] = g[i]; gb[i] = g[i]; break;
                           case OpKind::Sub: ga[i] = g[i]; gb[i] = -g[i]; break;
                           case OpKind::Mul: ga[i] = g[i] * y; gb[i] = g[i] * x; break;
                           default: {
                             const T yc = detail::clamp_magnitude(y);
                             ga[i] = g[i] / yc;
                             gb[i] = yc == y ? -g[i] * x / (yc * yc) : T(0);
                           }
                         }
                       }
                       if (a.requires_grad()) t.accumulate(a, a_full ? ga : detail::reduce_to(ga, amap, av.size()));
                       if (b.requires_grad()) t.accumulate(b, b_full ? gb : detail::reduce_to(gb, bmap, bv.size()));
                     });
}

// ---------------------------------------------------------------------------
// Unary elementwise ops

template <typename T>
Var<T> unary(OpKind kind, const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  const Index n = xv.size();
  const T lo = static_cast<T>(kClampMagnitude);
  for (Index i = 0; i < n; ++i) {
    const T v = xv[i];
    switch (kind) {
      case OpKind::Relu: out[i] = v > T(0) ? v : T(0); break;
      case OpKind::Tanh: out[i] = std::tanh(v); break;
      case OpKind::Sigmoid: out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v)); break;
      case OpKind::Log: out[i] = std::log(std::max(v, lo)); break;
      case OpKind::Exp: out[i] = std::exp(v); break;
      case OpKind::Abs: out[i] = std::abs(v); break;
      case OpKind::Square: out[i] = v * v; break;
      case OpKind::Sqrt: out[i] = v > T(0) ? std::sqrt(v) : T(0); break;
      default: throw std::invalid_argument("unary: not a unary op kind");
    }
  }
  return x.tape().record(std::move(out), {x}, [x, kind, lo](Tape<T>& t, Index self) {
    const VectorX<T>& g = t.grad(self).values();
    const Tensor<T>& xv = x.value();
    const Tensor<T>& yv = t.value(self);
    VectorX<T> gx(g.size());
    for (Index i = 0; i < g.size(); ++i) {
      const T v = xv[i];
      const T y = yv[i];
      switch (kind) {
        case OpKind::Relu: gx[i] = v > T(0) ? g[i] : T(0); break;
        case OpKind::Tanh: gx[i] = g[i] * (T(1) - y * y); break;
        case OpKind::Sigmoid: gx[i] = g[i] * y * (T(1) - y); break;
        case OpKind::Log: gx[i] = v >= lo ? g[i] / v : T(0); break;
        case OpKind::Exp: gx[i] = g[i] * y; break;
        case OpKind::Abs: gx[i] = v > T(0) ? g[i] : (v < T(0) ? -g[i] : T(0)); break;
        case OpKind::Square: gx[i] = T(2) * v * g[i]; break;
        default: gx[i] = y > T(0) ? g[i] / (T(2) * y) : T(0); break;
      }
    }
    t.accumulate(x, gx);
  });
}

/// Single entry point over every elementwise kind; `b` is required for the
/// binary kinds and ignored otherwise.
template <typename T>
Var<T> elementwise(OpKind kind, const Var<T>& a, const Var<T>* b = nullptr) {
  switch (kind) {
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::Div:
      if (b == nullptr) throw std::invalid_argument("elementwise: binary kind needs two operands");
      return binary(kind, a, *b);
    default:
      return unary(kind, a);
  }
}

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b) { return binary(OpKind::Add, a, b); }
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b) { return binary(OpKind::Sub, a, b); }
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b) { return binary(OpKind::Mul, a, b); }
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b) { return binary(OpKind::Div, a, b); }
template <typename T> Var<T> relu(const Var<T>& x) { return unary(OpKind::Relu, x); }
template <typename T> Var<T> tanh(const Var<T>& x) { return unary(OpKind::Tanh, x); }
template <typename T> Var<T> sigmoid(const Var<T>& x) { return unary(OpKind::Sigmoid, x); }
template <typename T> Var<T> log(const Var<T>& x) { return unary(OpKind::Log, x); }
template <typename T> Var<T> exp(const Var<T>& x) { return unary(OpKind::Exp, x); }
template <typename T> Var<T> abs(const Var<T>& x) { return unary(OpKind::Abs, x); }
template <typename T> Var<T> square(const Var<T>& x) { return unary(OpKind::Square, x); }
template <typename T> Var<T> sqrt(const Var<T>& x) { return unary(OpKind::Sqrt, x); }

template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T> Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }

/// x * s + o with constant scalars.
template <typename T>
Var<T> affine(const Var<T>& x, T scale, T offset = T(0)) {
  Tensor<T> out(x.shape(), (x.value().values().array() * scale + offset).matrix());
  return x.tape().record(std::move(out), {x}, [x, scale](Tape<T>& t, Index self) {
    t.accumulate(x, t.grad(self).values() * scale);
  });
}

template <typename T> Var<T> operator*(const Var<T>& x, T s) { return affine(x, s); }
template <typename T> Var<T> operator*(T s, const Var<T>& x) { return affine(x, s); }
template <typename T> Var<T> operator+(const Var<T>& x, T s) { return affine(x, T(1), s); }
template <typename T> Var<T> operator-(const Var<T>& x) { return affine(x, T(-1)); }

/// Multiplies by a constant tensor (no gradient to the mask).
template <typename T>
Var<T> mul_const(const Var<T>& x, const Tensor<T>& mask) {
  return mul(x, x.tape().constant(mask));
}

/// Elementwise clamp to [lo, hi]; gradient passes only where x is inside.
template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  Tensor<T> out(x.shape(), x.value().values().cwiseMax(lo).cwiseMin(hi));
  return x.tape().record(std::move(out), {x}, [x, lo, hi](Tape<T>& t, Index self) {
    const auto& xv = x.value().values();
    t.accumulate(x, (xv.array() >= lo && xv.array() <= hi).select(t.grad(self).values().array(), T(0)).matrix());
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> sum(const Var<T>& x) {
  Tensor<T> out = Tensor<T>::scalar(x.value().values().sum());
  return x.tape().record(std::move(out), {x}, [x](Tape<T>& t, Index self) {
    t.accumulate(x, VectorX<T>::Constant(x.size(), t.grad(self)[0]));
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  if (x.size() == 0) throw ShapeError("mean of empty tensor");
  return affine(sum(x), T(1) / static_cast<T>(x.size()));
}

/// Sum over one axis; the axis is removed unless keepdim.
template <typename T>
Var<T> sum(const Var<T>& x, Index axis, bool keepdim = false) {
  const Shape& s = x.shape();
  axis = detail::normalize_axis(axis, static_cast<Index>(s.size()), "sum");
  Index outer, mid, inner;
  detail::split_extents(s, axis, outer, mid, inner);
  Shape os = s;
  if (keepdim) os[axis] = 1; else os.erase(os.begin() + axis);
  Tensor<T> out(os);
  const Tensor<T>& xv = x.value();
  for (Index o = 0; o < outer; ++o)
    for (Index m = 0; m < mid; ++m)
      for (Index i = 0; i < inner; ++i) out[o * inner + i] += xv[(o * mid + m) * inner + i];
  return x.tape().record(std::move(out), {x}, [x, outer, mid, inner](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    VectorX<T> gx(x.size());
    for (Index o = 0; o < outer; ++o)
      for (Index m = 0; m < mid; ++m)
        for (Index i = 0; i < inner; ++i) gx[(o * mid + m) * inner + i] = g[o * inner + i];
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> mean(const Var<T>& x, Index axis, bool keepdim = false) {
  const Index a = detail::normalize_axis(axis, x.value().rank(), "mean");
  return affine(sum(x, a, keepdim), T(1) / static_cast<T>(x.shape()[a]));
}

/// Max over one axis; ties go to the lowest index, which also receives the gradient.
template <typename T>
Var<T> max(const Var<T>& x, Index axis, bool keepdim = false) {
  const Shape& s = x.shape();
  axis = detail::normalize_axis(axis, static_cast<Index>(s.size()), "max");
  Index outer, mid, inner;
  detail::split_extents(s, axis, outer, mid, inner);
  if (mid == 0) throw ShapeError("max over empty axis");
  Shape os = s;
  if (keepdim) os[axis] = 1; else os.erase(os.begin() + axis);
  Tensor<T> out(os);
  std::vector<Index> arg(static_cast<std::size_t>(outer * inner));
  const Tensor<T>& xv = x.value();
  for (Index o = 0; o < outer; ++o)
    for (Index i = 0; i < inner; ++i) {
      Index best = o * mid * inner + i;
      for (Index m = 1; m < mid; ++m) {
        const Index idx = (o * mid + m) * inner + i;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[o * inner + i] = xv[best];
      arg[static_cast<std::size_t>(o * inner + i)] = best;
    }
  return x.tape().record(std::move(out), {x}, [x, arg = std::move(arg)](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    VectorX<T> gx = VectorX<T>::Zero(x.size());
    for (std::size_t k = 0; k < arg.size(); ++k) gx[arg[k]] += g[static_cast<Index>(k)];
    t.accumulate(x, gx);
  });
}

// ---------------------------------------------------------------------------
// Shape ops

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [x](Tape<T>& t, Index self) { t.accumulate(x, t.grad(self).values()); });
}

/// General axis permutation: out.shape[i] = in.shape[perm[i]].
template <typename T>
Var<T> permute(const Var<T>& x, const std::vector<Index>& perm) {
  const Shape& s = x.shape();
  const Index rank = static_cast<Index>(s.size());
  if (static_cast<Index>(perm.size()) != rank) throw ShapeError("permute: rank mismatch for " + shape_str(s));
  Shape os(static_cast<std::size_t>(rank));
  for (Index i = 0; i < rank; ++i) os[i] = s[perm[i]];
  const Shape in_strides = strides_of(s);
  // Flat input index for each flat output index.
  const Index n = x.size();
  std::vector<Index> src(static_cast<std::size_t>(n));
  Shape counter(static_cast<std::size_t>(rank), 0);
  for (Index flat = 0; flat < n; ++flat) {
    Index off = 0;
    for (Index i = 0; i < rank; ++i) off += counter[i] * in_strides[perm[i]];
    src[static_cast<std::size_t>(flat)] = off;
    for (Index d = rank - 1; d >= 0; --d) {
      if (++counter[d] < os[d]) break;
      counter[d] = 0;
    }
  }
  Tensor<T> out(os);
  const Tensor<T>& xv = x.value();
  for (Index i = 0; i < n; ++i) out[i] = xv[src[static_cast<std::size_t>(i)]];
  return x.tape().record(std::move(out), {x}, [x, src = std::move(src)](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    VectorX<T> gx(x.size());
    for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] = g[static_cast<Index>(i)];
    t.accumulate(x, gx);
  });
}

template <typename T>
Var<T> transpose(const Var<T>& x) {
  if (x.value().rank() != 2) throw ShapeError("transpose needs rank 2, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, Index axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  axis = detail::normalize_axis(axis, static_cast<Index>(s0.size()), "concat");
  Shape os = s0;
  os[axis] = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = s0;
    if (a.size() != b.size()) throw shape_error("concat", s0, p.shape());
    a[axis] = b[axis] = 0;
    if (a != b) throw shape_error("concat", s0, p.shape());
    os[axis] += p.shape()[axis];
    if (&p.tape() != &parts[0].tape()) throw std::invalid_argument("concat: operands on different tapes");
  }
  Index outer, mid, inner;
  detail::split_extents(os, axis, outer, mid, inner);
  Tensor<T> out(os);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const Index pm = p.shape()[axis];
    const Tensor<T>& pv = p.value();
    for (Index o = 0; o < outer; ++o)
      for (Index m = 0; m < pm; ++m)
        for (Index i = 0; i < inner; ++i) out[(o * mid + off + m) * inner + i] = pv[(o * pm + m) * inner + i];
    off += pm;
  }
  return parts[0].tape().record(std::move(out), parts, [parts, offsets, axis, outer, mid, inner](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto& p = parts[k];
      if (!p.requires_grad()) continue;
      const Index pm = p.shape()[axis];
      VectorX<T> gp(p.size());
      for (Index o = 0; o < outer; ++o)
        for (Index m = 0; m < pm; ++m)
          for (Index i = 0; i < inner; ++i) gp[(o * pm + m) * inner + i] = g[(o * mid + offsets[k] + m) * inner + i];
      t.accumulate(p, gp);
    }
  });
}

/// Stacks equal-shape tensors along a new axis.
template <typename T>
Var<T> stack(const std::vector<Var<T>>& parts, Index axis) {
  if (parts.empty()) throw ShapeError("stack of zero tensors");
  Shape s = parts[0].shape();
  const Index rank = static_cast<Index>(s.size()) + 1;
  if (axis < 0) axis += rank;
  s.insert(s.begin() + axis, 1);
  std::vector<Var<T>> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.shape() != parts[0].shape()) throw shape_error("stack", parts[0].shape(), p.shape());
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, axis);
}

/// Half-open slice [begin, end) along one axis.
template <typename T>
Var<T> slice(const Var<T>& x, Index axis, Index begin, Index end) {
  const Shape& s = x.shape();
  axis = detail::normalize_axis(axis, static_cast<Index>(s.size()), "slice");
  if (begin < 0 || end > s[axis] || begin > end) throw ShapeError("slice: range out of bounds for " + shape_str(s));
  Index outer, mid, inner;
  detail::split_extents(s, axis, outer, mid, inner);
  Shape os = s;
  os[axis] = end - begin;
  const Index om = end - begin;
  Tensor<T> out(os);
  const Tensor<T>& xv = x.value();
  for (Index o = 0; o < outer; ++o)
    for (Index m = 0; m < om; ++m)
      for (Index i = 0; i < inner; ++i) out[(o * om + m) * inner + i] = xv[(o * mid + begin + m) * inner + i];
  return x.tape().record(std::move(out), {x}, [x, begin, om, outer, mid, inner](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    VectorX<T> gx = VectorX<T>::Zero(x.size());
    for (Index o = 0; o < outer; ++o)
      for (Index m = 0; m < om; ++m)
        for (Index i = 0; i < inner; ++i) gx[(o * mid + begin + m) * inner + i] = g[(o * om + m) * inner + i];
    t.accumulate(x, gx);
  });
}

/// Selects rows (first-axis entries) by index; repeated indices accumulate gradient.
template <typename T>
Var<T> gather_rows(const Var<T>& x, const std::vector<Index>& rows) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("gather_rows on scalar");
  const Index row_size = x.size() / std::max<Index>(s[0], 1);
  Shape os = s;
  os[0] = static_cast<Index>(rows.size());
  Tensor<T> out(os);
  const Tensor<T>& xv = x.value();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= s[0]) throw std::out_of_range("gather_rows: index out of range");
    out.values().segment(static_cast<Index>(r) * row_size, row_size) = xv.values().segment(rows[r] * row_size, row_size);
  }
  return x.tape().record(std::move(out), {x}, [x, rows, row_size](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    VectorX<T> gx = VectorX<T>::Zero(x.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      gx.segment(rows[r] * row_size, row_size) += g.values().segment(static_cast<Index>(r) * row_size, row_size);
    t.accumulate(x, gx);
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// [m,k] x [k,n] -> [m,n]. Backward: dA = dC B^T, dB = A^T dC.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b, "matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) throw shape_error("matmul", av.shape(), bv.shape());
  Tensor<T> out({av.dim(0), bv.dim(1)});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    const auto gm = g.matrix();
    if (a.requires_grad()) {
      Tensor<T> ga(a.shape());
      ga.matrix().noalias() = gm * b.value().matrix().transpose();
      t.accumulate(a, ga.values());
    }
    if (b.requires_grad()) {
      Tensor<T> gb(b.shape());
      gb.matrix().noalias() = a.value().matrix().transpose() * gm;
      t.accumulate(b, gb.values());
    }
  });
}

/// Batched product [B,m,k] x [B,k,n] -> [B,m,n].
template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b) {
  auto& tape = detail::same_tape(a, b, "bmm");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1))
    throw shape_error("bmm", av.shape(), bv.shape());
  const Index B = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor<T> out({B, m, n});
  for (Index i = 0; i < B; ++i) {
    Eigen::Map<const RowMatrixX<T>> A(av.data() + i * m * k, m, k);
    Eigen::Map<const RowMatrixX<T>> Bm(bv.data() + i * k * n, k, n);
    Eigen::Map<RowMatrixX<T>> C(out.data() + i * m * n, m, n);
    C.noalias() = A * Bm;
  }
  return tape.record(std::move(out), {a, b}, [a, b, B, m, k, n](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    Tensor<T> ga(a.shape()), gb(b.shape());
    for (Index i = 0; i < B; ++i) {
      Eigen::Map<const RowMatrixX<T>> G(g.data() + i * m * n, m, n);
      Eigen::Map<const RowMatrixX<T>> A(av.data() + i * m * k, m, k);
      Eigen::Map<const RowMatrixX<T>> Bm(bv.data() + i * k * n, k, n);
      if (a.requires_grad()) Eigen::Map<RowMatrixX<T>>(ga.data() + i * m * k, m, k).noalias() = G * Bm.transpose();
      if (b.requires_grad()) Eigen::Map<RowMatrixX<T>>(gb.data() + i * k * n, k, n).noalias() = A.transpose() * G;
    }
    if (a.requires_grad()) t.accumulate(a, ga.values());
    if (b.requires_grad()) t.accumulate(b, gb.values());
  });
}

/// Numerically stable softmax along `axis` (max subtraction).
template <typename T>
Var<T> softmax(const Var<T>& x, Index axis) {
  const Shape& s = x.shape();
  axis = detail::normalize_axis(axis, static_cast<Index>(s.size()), "softmax");
  Index outer, mid, inner;
  detail::split_extents(s, axis, outer, mid, inner);
  Tensor<T> out(s);
  const Tensor<T>& xv = x.value();
  for (Index o = 0; o < outer; ++o)
    for (Index i = 0; i < inner; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (Index m = 0; m < mid; ++m) mx = std::max(mx, xv[(o * mid + m) * inner + i]);
      T denom = 0;
      for (Index m = 0; m < mid; ++m) {
        const Index idx = (o * mid + m) * inner + i;
        out[idx] = std::exp(xv[idx] - mx);
        denom += out[idx];
      }
      for (Index m = 0; m < mid; ++m) out[(o * mid + m) * inner + i] /= denom;
    }
  return x.tape().record(std::move(out), {x}, [x, outer, mid, inner](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    VectorX<T> gx(x.size());
    for (Index o = 0; o < outer; ++o)
      for (Index i = 0; i < inner; ++i) {
        T dot = 0;
        for (Index m = 0; m < mid; ++m) {
          const Index idx = (o * mid + m) * inner + i;
          dot += g[idx] * y[idx];
        }
        for (Index m = 0; m < mid; ++m) {
          const Index idx = (o * mid + m) * inner + i;
          gx[idx] = y[idx] * (g[idx] - dot);
        }
      }
    t.accumulate(x, gx);
  });
}

}  // namespace mvmesh
