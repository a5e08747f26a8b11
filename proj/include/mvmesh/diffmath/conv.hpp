#pragma once

#include "mvmesh/diffmath/ops.hpp"

#include <array>
#include <optional>
#include <type_traits>

namespace mvmesh {

namespace detail {

/// Spatial extents of a 2D or 3D conv, with 2D treated as depth 1.
struct ConvGeometry {
  Index channels = 0;
  std::array<Index, 3> in{};      // D, H, W
  std::array<Index, 3> kernel{};  // kd, kh, kw
  std::array<Index, 3> out{};
  std::array<Index, 3> stride{};
  std::array<Index, 3> pad{};

  Index patch() const { return channels * kernel[0] * kernel[1] * kernel[2]; }
  Index positions() const { return out[0] * out[1] * out[2]; }
};

template <typename T>
RowMatrixX<T> im2col(const T* x, const ConvGeometry& g) {
  RowMatrixX<T> cols = RowMatrixX<T>::Zero(g.patch(), g.positions());
  Index row = 0;
  for (Index c = 0; c < g.channels; ++c)
    for (Index kz = 0; kz < g.kernel[0]; ++kz)
      for (Index ky = 0; ky < g.kernel[1]; ++ky)
        for (Index kx = 0; kx < g.kernel[2]; ++kx, ++row) {
          Index col = 0;
          for (Index oz = 0; oz < g.out[0]; ++oz) {
            const Index iz = oz * g.stride[0] - g.pad[0] + kz;
            for (Index oy = 0; oy < g.out[1]; ++oy) {
              const Index iy = oy * g.stride[1] - g.pad[1] + ky;
              for (Index ox = 0; ox < g.out[2]; ++ox, ++col) {
                const Index ix = ox * g.stride[2] - g.pad[2] + kx;
                if (iz < 0 || iz >= g.in[0] || iy < 0 || iy >= g.in[1] || ix < 0 || ix >= g.in[2]) continue;
                cols(row, col) = x[((c * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix];
              }
            }
          }
        }
  return cols;
}

template <typename T>
void col2im(const RowMatrixX<T>& cols, const ConvGeometry& g, T* x) {
  Index row = 0;
  for (Index c = 0; c < g.channels; ++c)
    for (Index kz = 0; kz < g.kernel[0]; ++kz)
      for (Index ky = 0; ky < g.kernel[1]; ++ky)
        for (Index kx = 0; kx < g.kernel[2]; ++kx, ++row) {
          Index col = 0;
          for (Index oz = 0; oz < g.out[0]; ++oz) {
            const Index iz = oz * g.stride[0] - g.pad[0] + kz;
            for (Index oy = 0; oy < g.out[1]; ++oy) {
              const Index iy = oy * g.stride[1] - g.pad[1] + ky;
              for (Index ox = 0; ox < g.out[2]; ++ox, ++col) {
                const Index ix = ox * g.stride[2] - g.pad[2] + kx;
                if (iz < 0 || iz >= g.in[0] || iy < 0 || iy >= g.in[1] || ix < 0 || ix >= g.in[2]) continue;
                x[((c * g.in[0] + iz) * g.in[1] + iy) * g.in[2] + ix] += cols(row, col);
              }
            }
          }
        }
}

}  // namespace detail

/// Cross-correlation with zero padding over 2 or 3 spatial dims.
///
/// Layout is channel-first without a batch axis: x is [Cin,H,W] or
/// [Cin,D,H,W], w is [Cout,Cin,k,k] or [Cout,Cin,k,k,k], bias is [Cout].
/// Output spatial size per axis is floor((in + 2p - k) / s) + 1.
template <typename T>
Var<T> conv(const Var<T>& x, const Var<T>& w, const std::type_identity_t<std::optional<Var<T>>>& bias, Index stride,
            Index padding) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const Index dims = static_cast<Index>(xs.size()) - 1;
  if ((dims != 2 && dims != 3) || static_cast<Index>(ws.size()) != dims + 2)
    throw shape_error("conv: expected 2D or 3D operands", xs, ws);
  if (ws[1] != xs[0]) throw shape_error("conv: channel mismatch", xs, ws);
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv: stride must be >= 1 and padding >= 0");

  detail::ConvGeometry g;
  g.channels = xs[0];
  const Index lead = 3 - dims;
  for (Index a = 0; a < 3; ++a) {
    const bool real = a >= lead;
    g.in[a] = real ? xs[1 + a - lead] : 1;
    g.kernel[a] = real ? ws[2 + a - lead] : 1;
    g.stride[a] = real ? stride : 1;
    g.pad[a] = real ? padding : 0;
    if (g.kernel[a] > g.in[a] + 2 * g.pad[a])
      throw shape_error("conv: kernel larger than padded input", xs, ws);
    g.out[a] = (g.in[a] + 2 * g.pad[a] - g.kernel[a]) / g.stride[a] + 1;
  }
  const Index cout = ws[0];
  if (bias && (bias->value().rank() != 1 || bias->dim(0) != cout)) throw shape_error("conv: bias", bias->shape(), ws);

  RowMatrixX<T> cols = detail::im2col(x.value().data(), g);
  Shape os{cout};
  for (Index a = lead; a < 3; ++a) os.push_back(g.out[a]);
  Tensor<T> out(os);
  auto om = out.matrix(cout, g.positions());
  om.noalias() = w.value().matrix(cout, g.patch()) * cols;
  if (bias) om.colwise() += bias->value().values();

  std::vector<Var<T>> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  const bool need_x = x.requires_grad();
  return x.tape().record(
      std::move(out), inputs,
      [x, w, bias, g, cout, need_x, cols = std::move(cols)](Tape<T>& t, Index self) {
        const auto gm = t.grad(self).matrix(cout, g.positions());
        if (w.requires_grad()) {
          Tensor<T> gw(w.shape());
          gw.matrix(cout, g.patch()).noalias() = gm * cols.transpose();
          t.accumulate(w, gw.values());
        }
        if (bias && bias->requires_grad()) t.accumulate(*bias, gm.rowwise().sum());
        if (need_x) {
          RowMatrixX<T> dcols = w.value().matrix(cout, g.patch()).transpose() * gm;
          VectorX<T> gx = VectorX<T>::Zero(x.size());
          detail::col2im(dcols, g, gx.data());
          t.accumulate(x, gx);
        }
      });
}

template <typename T>
Var<T> conv(const Var<T>& x, const Var<T>& w, Index stride, Index padding) {
  return conv(x, w, std::nullopt, stride, padding);
}

}  // namespace mvmesh
