#include "doctest.h"

#include "mvmesh/depthrender/rasterize.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/geomcore/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace mvmesh;

namespace {

CameraView axis_camera(int w = 32, int h = 24, double f = 40.0) {
  Eigen::Matrix3d K;
  K << f, 0, w / 2.0, 0, f, h / 2.0, 0, 0, 1;
  Matrix34d T = Matrix34d::Zero();
  T.leftCols<3>().setIdentity();
  return CameraView(K, T, w, h);
}

TriangleMesh random_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3), r(0.1, 0.25);
  std::vector<TriangleMesh> parts;
  for (int i = 0; i < 3; ++i) parts.push_back(icosphere(2, r(rng), Eigen::Vector3d(u(rng), u(rng), 0.2 * u(rng))));
  return merge_meshes(parts);
}

}  // namespace

TEST_CASE("empty mesh renders background") {
  const auto d = rasterize_depth(TriangleMesh(), axis_camera());
  CHECK(d.width == 32);
  CHECK(d.height == 24);
  CHECK(d.covered() == 0);
  CHECK(raycast_depth_oracle(TriangleMesh(), axis_camera()).covered() == 0);
}

TEST_CASE("frustum-filling quad at depth 0.5") {
  const CameraView cam = axis_camera();
  // Corners pushed past the frustum so every pixel centre is covered.
  const double z = 0.5, hx = 1.2 * z * 16.0 / 40.0, hy = 1.2 * z * 12.0 / 40.0;
  const TriangleMesh quad({{-hx, -hy, z}, {hx, -hy, z}, {hx, hy, z}, {-hx, hy, z}}, {{{0, 1, 2}}, {{0, 2, 3}}});
  const auto d = rasterize_depth(quad, cam);
  for (float v : d.values) CHECK(std::abs(v - 0.5) <= 1e-6);
}

TEST_CASE("oblique plane depth is perspective-correct") {
  const CameraView cam = axis_camera();
  // Plane z = 1 + 0.5 x; exact depth through pixel ray (rx, ry, 1) is 1 / (1 - 0.5 rx).
  auto pt = [](double x, double y) { return Eigen::Vector3d(x, y, 1.0 + 0.5 * x); };
  const TriangleMesh quad({pt(-0.6, -0.6), pt(0.6, -0.6), pt(0.6, 0.6), pt(-0.6, 0.6)}, {{{0, 1, 2}}, {{0, 2, 3}}});
  const auto d = rasterize_depth(quad, cam);
  int checked = 0;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      if (d.at(x, y) == 0.0f) continue;
      const double rx = cam.ray(x + 0.5, y + 0.5).x();
      CHECK(std::abs(d.at(x, y) - 1.0 / (1.0 - 0.5 * rx)) <= 1e-6);
      ++checked;
    }
  CHECK(checked > 100);
}

TEST_CASE("raycast oracle basics") {
  const Eigen::Vector3d o = Eigen::Vector3d::Zero();
  const Eigen::Vector3d a(-1, -1, 2), b(1, -1, 2), c(0, 1, 2);
  const auto hit = intersect_triangle(o, Eigen::Vector3d(0, 0, 1), a, b, c);
  REQUIRE(hit);
  CHECK(*hit == doctest::Approx(2.0));
  CHECK_FALSE(intersect_triangle(o, Eigen::Vector3d(1, 0, 0), a, b, c));

  const TriangleMesh tri({a, b, c}, {{{0, 1, 2}}});
  const CameraView cam = axis_camera();
  const auto d = raycast_depth_oracle(tri, cam);
  CHECK(d.at(16, 12) == doctest::Approx(2.0));
}

TEST_CASE("rasterizer agrees with ray-cast oracle on random scenes") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TriangleMesh scene = random_scene(seed);
    const CameraView cam = CameraView::look_at({0.4, -1.1, 0.5}, {0, 0, 0}, {0, 0, 1}, 48.0, 40, 40);
    const auto r = rasterize_depth(scene, cam);
    const auto o = raycast_depth_oracle(scene, cam);
    int mismatch = 0, both = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < r.values.size(); ++k) {
      const bool rc = r.values[k] != 0.0f, oc = o.values[k] != 0.0f;
      if (rc != oc) ++mismatch;
      if (rc && oc) {
        ++both;
        worst = std::max(worst, std::abs(static_cast<double>(r.values[k]) - o.values[k]));
      }
    }
    CHECK(both > 200);
    CHECK(worst <= 1e-6);
    CHECK(mismatch <= static_cast<int>(0.005 * r.values.size()));
  }
}

TEST_CASE("face order does not change the render") {
  const TriangleMesh scene = random_scene(7);
  const CameraView cam = CameraView::look_at({0.0, -1.2, 0.3}, {0, 0, 0}, {0, 0, 1}, 48.0, 40, 40);
  auto faces = scene.faces();
  std::mt19937_64 rng(11);
  std::shuffle(faces.begin(), faces.end(), rng);
  const TriangleMesh shuffled(scene.vertices(), faces);
  CHECK(rasterize_depth(scene, cam).values == rasterize_depth(shuffled, cam).values);

  // Duplicated coplanar quad: the smaller face index wins the tie.
  const TriangleMesh quad({{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1}},
                          {{{0, 1, 2}}, {{0, 2, 3}}, {{0, 1, 2}}, {{0, 2, 3}}});
  const auto rb = rasterize(quad, axis_camera());
  for (int f : rb.face_id) CHECK(f <= 1);
}

TEST_CASE("back faces are drawn and behind-camera faces skipped") {
  const CameraView cam = axis_camera();
  const TriangleMesh cw({{-1, -1, 1}, {0, 1, 1}, {1, -1, 1}}, {{{0, 1, 2}}});
  const TriangleMesh ccw({{-1, -1, 1}, {1, -1, 1}, {0, 1, 1}}, {{{0, 1, 2}}});
  CHECK(rasterize_depth(cw, cam).values == rasterize_depth(ccw, cam).values);
  CHECK(rasterize_depth(cw, cam).covered() > 0);
  const TriangleMesh straddle({{-1, -1, -0.5}, {1, -1, 1}, {0, 1, 1}}, {{{0, 1, 2}}});
  CHECK(rasterize_depth(straddle, cam).covered() == 0);
}

TEST_CASE("normal shading faces the camera") {
  const CameraView cam = axis_camera();
  const TriangleMesh quad({{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1}}, {{{0, 1, 2}}, {{0, 2, 3}}});
  const auto rb = rasterize(quad, cam);
  const auto img = shade_normals(quad, cam, rb);
  const std::size_t plane = rb.face_id.size();
  CHECK(img.data[0] == doctest::Approx(0.5));
  CHECK(img.data[plane] == doctest::Approx(0.5));
  CHECK(img.data[2 * plane] == doctest::Approx(0.0));
}

TEST_CASE("dpth round trip and errors") {
  DepthMap d(3, 2);
  d.at(1, 0) = 0.75f;
  d.at(2, 1) = 1.0e-3f;
  std::stringstream ss;
  write_dpth(ss, d);
  CHECK(ss.str().size() == 4 + 8 + 6 * 4);
  const auto back = read_dpth(ss);
  CHECK(back.width == 3);
  CHECK(back.values == d.values);

  std::string bytes;
  {
    std::stringstream s2;
    write_dpth(s2, d);
    bytes = s2.str();
  }
  std::stringstream bad_magic("DPTX" + bytes.substr(4));
  CHECK_THROWS_AS(read_dpth(bad_magic), ValidationError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 2));
  CHECK_THROWS_AS(read_dpth(truncated), ValidationError);
  std::stringstream trailing(bytes + "x");
  CHECK_THROWS_AS(read_dpth(trailing), ValidationError);
}

TEST_CASE("ppm quantisation is a fixed point") {
  Image img(4, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : img.data) v = u(rng);
  const Image q = quantize8(img);
  CHECK(quantize8(q).data == q.data);
  const std::string path = (std::filesystem::temp_directory_path() / "mvmesh_test_depthrender.ppm").string();
  save_ppm(path, img);
  CHECK(load_ppm(path).data == q.data);
}
