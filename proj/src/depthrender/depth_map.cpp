#include "mvmesh/depthrender/depth_map.hpp"

#include "mvmesh/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mvmesh {

int DepthMap::covered() const {
  return static_cast<int>(std::count_if(values.begin(), values.end(), [](float v) { return v != 0.0f; }));
}

void write_dpth(std::ostream& out, const DepthMap& d) {
  binio::put_magic(out, "DPTH");
  binio::put_u32(out, static_cast<std::uint32_t>(d.width));
  binio::put_u32(out, static_cast<std::uint32_t>(d.height));
  for (float v : d.values) binio::put_f32(out, v);
}

DepthMap read_dpth(std::istream& in, const std::string& name) {
  binio::Reader r(in, name);
  r.magic("DPTH");
  const std::uint32_t w = r.u32("width"), h = r.u32("height");
  if (w == 0 || h == 0 || w > 16384 || h > 16384) r.fail("image size out of range");
  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  for (float& v : d.values) {
    v = r.f32("values");
    if (!std::isfinite(v) || v < 0.0f) r.fail("depth must be finite and non-negative");
  }
  r.expect_end();
  return d;
}

void save_dpth(const std::string& path, const DepthMap& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_dpth(out, d);
}

DepthMap load_dpth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return read_dpth(in, path);
}

namespace {

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  const std::size_t plane = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) out.put(static_cast<char>(to_byte(img.data[c * plane + i])));
}

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw ValidationError(path + ": not an 8-bit binary PPM");
  in.get();
  Image img(w, h);
  const std::size_t plane = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const int b = in.get();
      if (b == std::char_traits<char>::eof()) throw ValidationError(path + ": truncated pixel data");
      img.data[c * plane + i] = static_cast<float>(b) / 255.0f;
    }
  return img;
}

}  // namespace mvmesh
