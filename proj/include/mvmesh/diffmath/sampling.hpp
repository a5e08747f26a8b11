#pragma once

#include "mvmesh/diffmath/ops.hpp"

#include <cmath>

namespace mvmesh {

/// Bilinear lookup of a [C,H,W] feature map at continuous pixel coordinates.
///
/// `points` is [P,2] holding (u,v) with pixel (x,y) covering [x,x+1) x [y,y+1),
/// so the center of pixel (x,y) is (x+0.5, y+0.5). Taps that fall outside the
/// map read zero. Returns [P,C]; differentiable in both the map and the points.
template <typename T>
Var<T> sample_bilinear(const Var<T>& fmap, const Var<T>& points) {
  auto& tape = detail::same_tape(fmap, points, "sample_bilinear");
  const Shape& fs = fmap.shape();
  const Shape& ps = points.shape();
  if (fs.size() != 3 || ps.size() != 2 || ps[1] != 2) throw shape_error("sample_bilinear", fs, ps);
  const Index C = fs[0], H = fs[1], W = fs[2], P = ps[0];
  const Tensor<T>& f = fmap.value();
  const Tensor<T>& pts = points.value();

  auto tap = [&](Index c, Index y, Index x) -> T {
    if (x < 0 || x >= W || y < 0 || y >= H) return T(0);
    return f[(c * H + y) * W + x];
  };

  Tensor<T> out({P, C});
  for (Index p = 0; p < P; ++p) {
    const T x = pts[2 * p] - T(0.5);
    const T y = pts[2 * p + 1] - T(0.5);
    const T xf = std::floor(x), yf = std::floor(y);
    const Index x0 = static_cast<Index>(xf), y0 = static_cast<Index>(yf);
    const T ax = x - xf, ay = y - yf;
    for (Index c = 0; c < C; ++c) {
      out[p * C + c] = (T(1) - ay) * ((T(1) - ax) * tap(c, y0, x0) + ax * tap(c, y0, x0 + 1)) +
                       ay * ((T(1) - ax) * tap(c, y0 + 1, x0) + ax * tap(c, y0 + 1, x0 + 1));
    }
  }

  return tape.record(std::move(out), {fmap, points}, [fmap, points, C, H, W, P](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& f = fmap.value();
    const Tensor<T>& pts = points.value();
    const bool need_f = fmap.requires_grad();
    const bool need_p = points.requires_grad();
    VectorX<T> gf = need_f ? VectorX<T>::Zero(fmap.size()) : VectorX<T>();
    VectorX<T> gp = need_p ? VectorX<T>::Zero(points.size()) : VectorX<T>();
    auto inside = [&](Index y, Index x) { return x >= 0 && x < W && y >= 0 && y < H; };
    for (Index p = 0; p < P; ++p) {
      const T x = pts[2 * p] - T(0.5);
      const T y = pts[2 * p + 1] - T(0.5);
      const T xf = std::floor(x), yf = std::floor(y);
      const Index x0 = static_cast<Index>(xf), y0 = static_cast<Index>(yf);
      const T ax = x - xf, ay = y - yf;
      const Index ys[2] = {y0, y0 + 1};
      const Index xs[2] = {x0, x0 + 1};
      const T wy[2] = {T(1) - ay, ay};
      const T wx[2] = {T(1) - ax, ax};
      const T dwy[2] = {T(-1), T(1)};
      const T dwx[2] = {T(-1), T(1)};
      for (Index c = 0; c < C; ++c) {
        const T go = g[p * C + c];
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            if (!inside(ys[i], xs[j])) continue;
            const Index idx = (c * H + ys[i]) * W + xs[j];
            if (need_f) gf[idx] += go * wy[i] * wx[j];
            if (need_p) {
              gp[2 * p] += go * f[idx] * wy[i] * dwx[j];
              gp[2 * p + 1] += go * f[idx] * dwy[i] * wx[j];
            }
          }
      }
    }
    if (need_f) t.accumulate(fmap, gf);
    if (need_p) t.accumulate(points, gp);
  });
}

}  // namespace mvmesh
