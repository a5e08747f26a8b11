#pragma once

#include "mvmesh/diffmath/tensor.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mvmesh {

/// Per-pixel camera-frame depth in meters, row-major; 0 marks background.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f) {}

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  int covered() const;

  template <typename T>
  Tensor<T> tensor() const {
    Tensor<T> t({height, width});
    for (std::size_t i = 0; i < values.size(); ++i) t[static_cast<Index>(i)] = static_cast<T>(values[i]);
    return t;
  }

  template <typename T>
  static DepthMap from_tensor(const Tensor<T>& t) {
    if (t.rank() != 2) throw ShapeError("depth map tensor must be [H,W], got " + shape_str(t.shape()));
    DepthMap d(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(0)));
    for (Index i = 0; i < t.size(); ++i) d.values[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
    return d;
  }
};

// .dpth: "DPTH", u32 width, u32 height, f32 row-major values, little-endian.
void write_dpth(std::ostream& out, const DepthMap& d);
DepthMap read_dpth(std::istream& in, const std::string& name = "<stream>");
void save_dpth(const std::string& path, const DepthMap& d);
DepthMap load_dpth(const std::string& path);

/// 3-channel float image in [0,1], channel-first.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // [3,H,W]

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f) {}

  template <typename T>
  Tensor<T> tensor() const {
    Tensor<T> t({3, height, width});
    for (std::size_t i = 0; i < data.size(); ++i) t[static_cast<Index>(i)] = static_cast<T>(data[i]);
    return t;
  }
};

/// Binary PPM (P6, 8-bit). Values are quantised to round(255 v).
void save_ppm(const std::string& path, const Image& img);
Image load_ppm(const std::string& path);
/// The exact values an image takes after a save/load cycle.
Image quantize8(const Image& img);

}  // namespace mvmesh
