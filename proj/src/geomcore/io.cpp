#include "mvmesh/geomcore/io.hpp"

#include "mvmesh/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace mvmesh {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, const std::string& name, long line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(name, line, "expected a number, got '" + std::string(tok) + "'");
  return v;
}

long parse_long(std::string_view tok, const std::string& name, long line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw FormatError(name, line, "expected an integer, got '" + std::string(tok) + "'");
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

TriangleMesh read_obj(std::istream& in, const std::string& name) {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Face> faces;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() != 4) throw FormatError(name, lineno, "vertex needs exactly 3 coordinates");
      vertices.emplace_back(parse_double(tok[1], name, lineno), parse_double(tok[2], name, lineno),
                            parse_double(tok[3], name, lineno));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) throw FormatError(name, lineno, "only triangular faces are supported");
      Face f{};
      for (int k = 0; k < 3; ++k) {
        const long idx = parse_long(tok[static_cast<std::size_t>(k) + 1], name, lineno);
        if (idx <= 0) throw FormatError(name, lineno, "face index " + std::to_string(idx) + ": indices are 1-based");
        f[static_cast<std::size_t>(k)] = static_cast<int>(idx - 1);
      }
      faces.push_back(f);
    } else {
      throw FormatError(name, lineno, "unsupported record '" + std::string(tok[0]) + "'");
    }
  }
  try {
    return TriangleMesh(std::move(vertices), std::move(faces));
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  for (const auto& v : mesh.vertices())
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

TriangleMesh load_obj(const std::string& path) {
  auto in = open_in(path);
  return read_obj(in, path);
}

void save_obj(const std::string& path, const TriangleMesh& mesh) {
  auto out = open_out(path);
  write_obj(out, mesh);
}

CameraView read_camera(std::istream& in, const std::string& name) {
  std::string line;
  long lineno = 0;
  auto next_numbers = [&](std::size_t expected, const char* what) {
    while (std::getline(in, line)) {
      ++lineno;
      const auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != expected)
        throw FormatError(name, lineno, std::string(what) + ": expected " + std::to_string(expected) + " numbers, got " +
                                            std::to_string(tok.size()));
      std::vector<double> v;
      for (auto t : tok) v.push_back(parse_double(t, name, lineno));
      return v;
    }
    throw FormatError(name, lineno, std::string("missing ") + what);
  };
  const auto k = next_numbers(9, "intrinsics");
  const auto t = next_numbers(12, "extrinsics");
  const auto s = next_numbers(2, "image size");
  Eigen::Matrix3d K;
  Matrix34d T;
  for (int i = 0; i < 9; ++i) K(i / 3, i % 3) = k[static_cast<std::size_t>(i)];
  for (int i = 0; i < 12; ++i) T(i / 4, i % 4) = t[static_cast<std::size_t>(i)];
  try {
    return CameraView(K, T, static_cast<int>(s[0]), static_cast<int>(s[1]));
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
}

void write_camera(std::ostream& out, const CameraView& cam) {
  for (int i = 0; i < 9; ++i) out << (i ? " " : "") << format_double(cam.K()(i / 3, i % 3));
  out << '\n';
  for (int i = 0; i < 12; ++i) out << (i ? " " : "") << format_double(cam.extrinsics()(i / 4, i % 4));
  out << '\n' << cam.width() << ' ' << cam.height() << '\n';
}

CameraView load_camera(const std::string& path) {
  auto in = open_in(path);
  return read_camera(in, path);
}

void save_camera(const std::string& path, const CameraView& cam) {
  auto out = open_out(path);
  write_camera(out, cam);
}

}  // namespace mvmesh
