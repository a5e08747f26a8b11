#include "doctest.h"

#include "mvmesh/diffmath/gradcheck.hpp"
#include "mvmesh/error.hpp"
#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/geometry_ops.hpp"
#include "mvmesh/geomcore/io.hpp"
#include "mvmesh/geomcore/mesh.hpp"
#include "mvmesh/geomcore/primitives.hpp"
#include "mvmesh/geomcore/sampling.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace mvmesh;

namespace {

const std::string kData = MVMESH_TEST_DATA;

CameraView simple_camera(double fx = 100.0, int w = 64, int h = 48) {
  Eigen::Matrix3d K;
  K << fx, 0, w / 2.0, 0, fx, h / 2.0, 0, 0, 1;
  Matrix34d T = Matrix34d::Zero();
  T.leftCols<3>().setIdentity();
  return CameraView(K, T, w, h);
}

double signed_volume(const TriangleMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces()) {
    const auto& a = m.vertices()[f[0]];
    const auto& b = m.vertices()[f[1]];
    const auto& c = m.vertices()[f[2]];
    v += a.dot(b.cross(c)) / 6.0;
  }
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("project examples") {
  const CameraView cam = simple_camera();
  const auto p = cam.project(Eigen::Vector3d(0, 0, 2.5));
  CHECK(p.pixel.x() == 32.0);
  CHECK(p.pixel.y() == 24.0);
  CHECK(p.depth == 2.5);
  CHECK(p.in_front);
  const auto q = cam.project(Eigen::Vector3d(1, 0, 1));
  CHECK(q.pixel.x() == doctest::Approx(32.0 + 100.0));
  const auto behind = cam.project(Eigen::Vector3d(0, 0, -1));
  CHECK_FALSE(behind.in_front);
}

TEST_CASE("project and unproject round trip") {
  const CameraView cam = CameraView::look_at({0.3, -0.8, 0.6}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 64.0), d(0.2, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), y = u(rng), z = d(rng);
    const auto p = cam.project(cam.unproject(x, y, z));
    CHECK(std::abs(p.pixel.x() - x) <= 1e-6);
    CHECK(std::abs(p.pixel.y() - y) <= 1e-6);
    CHECK(p.depth == doctest::Approx(z).epsilon(1e-12));
  }
}

TEST_CASE("camera validation") {
  Eigen::Matrix3d K;
  K << 100, 0, 32, 0, 100, 24, 0, 0, 1;
  Matrix34d T = Matrix34d::Zero();
  T.leftCols<3>().setIdentity();
  Matrix34d flipped = T;
  flipped(0, 0) = -1.0;
  CHECK_THROWS_AS(CameraView(K, flipped, 64, 48), ValidationError);
  Eigen::Matrix3d bad_f = K;
  bad_f(0, 0) = -5;
  CHECK_THROWS_AS(CameraView(bad_f, T, 64, 48), ValidationError);
  Eigen::Matrix3d bad_pp = K;
  bad_pp(0, 2) = 100;
  CHECK_THROWS_AS(CameraView(bad_pp, T, 64, 48), ValidationError);
  CHECK_NOTHROW(CameraView(K, T, 64, 48));
}

TEST_CASE("plane homography examples") {
  const CameraView a = CameraView::look_at({0.2, -1.0, 0.3}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  const Eigen::Matrix3d H = plane_homography(a, a, 0.9);
  CHECK((H / H(2, 2) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);

  // Pure translation along the optical axis.
  Matrix34d T = a.extrinsics();
  T(2, 3) += 0.3;
  const CameraView b(a.K(), T, 64, 64);
  const auto c = apply_homography(plane_homography(b, a, 1.2), {32.0, 32.0});
  CHECK(c.x() == doctest::Approx(32.0));
  CHECK(c.y() == doctest::Approx(32.0));

  CHECK_THROWS_AS(plane_homography(a, b, 0.0), ValidationError);
}

TEST_CASE("plane homography agrees with direct reprojection") {
  const CameraView dst = CameraView::look_at({0.0, -1.0, 0.2}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  const CameraView src = CameraView::look_at({0.7, -0.7, 0.4}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  const double depth = 0.85;
  const Eigen::Matrix3d H = plane_homography(src, dst, depth);
  double worst = 0.0;
  for (double y = 0.5; y < 64; y += 7)
    for (double x = 0.5; x < 64; x += 7) {
      const Eigen::Vector3d world = dst.unproject(x, y, depth);
      const Eigen::Vector2d direct = src.project(world).pixel;
      worst = std::max(worst, (apply_homography(H, {x, y}) - direct).norm());
    }
  CHECK(worst <= 0.5);
  CHECK(worst <= 1e-8);
}

TEST_CASE("plane homography composition on a lateral-translation rig") {
  // Both cameras share orientation, so the plane z=d is the same plane in both frames.
  const CameraView a = simple_camera(90.0, 64, 64);
  Matrix34d T = a.extrinsics();
  T(0, 3) = 0.15;
  T(1, 3) = -0.05;
  const CameraView b(a.K(), T, 64, 64);
  for (double d : {0.3, 0.9, 2.0}) {
    Eigen::Matrix3d M = plane_homography(a, b, d) * plane_homography(b, a, d);
    M /= M(2, 2);
    CHECK((M - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("scaled camera keeps projections proportional") {
  const CameraView cam = CameraView::look_at({0.3, -0.9, 0.2}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  const CameraView small = cam.scaled(0.25);
  CHECK(small.width() == 16);
  const Eigen::Vector3d p(0.05, 0.1, -0.02);
  CHECK((small.project(p).pixel - 0.25 * cam.project(p).pixel).norm() <= 1e-12);
}

TEST_CASE("mesh topology on cube and icosphere") {
  const TriangleMesh cube = load_obj(kData + "/cube.obj");
  CHECK(cube.vertex_count() == 8);
  CHECK(cube.face_count() == 12);
  CHECK(3 * cube.face_count() == 2 * static_cast<int>(cube.edges().size()));
  CHECK(cube.euler_characteristic() == 2);
  CHECK(signed_volume(cube) == doctest::Approx(1.0));

  for (int level = 0; level <= 3; ++level) {
    const TriangleMesh s = icosphere(level, 0.5);
    CHECK(3 * s.face_count() == 2 * static_cast<int>(s.edges().size()));
    CHECK(s.euler_characteristic() == 2);
    CHECK(s.face_count() == 20 * (1 << (2 * level)));
    CHECK(signed_volume(s) > 0.0);
    for (const auto& v : s.vertices()) CHECK(v.norm() == doctest::Approx(0.5));
  }
}

TEST_CASE("adjacency is symmetric and consistent with faces") {
  const TriangleMesh m = merge_meshes({icosphere(1, 0.3), box({0.2, 0.3, 0.1}), cylinder(0.1, 0.2, 9)});
  std::set<std::pair<int, int>> from_faces;
  for (const auto& f : m.faces())
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      from_faces.insert({std::min(a, b), std::max(a, b)});
    }
  CHECK(from_faces.size() == m.edges().size());
  for (const auto& e : m.edges()) CHECK(from_faces.count({e[0], e[1]}) == 1);
  for (int i = 0; i < m.vertex_count(); ++i)
    for (int j : m.neighbors(i)) {
      const auto& nj = m.neighbors(j);
      CHECK(std::find(nj.begin(), nj.end(), i) != nj.end());
    }
}

TEST_CASE("primitives are closed and outward") {
  for (const TriangleMesh& m : {box({0.3, 0.2, 0.4}), cylinder(0.15, 0.3, 12)}) {
    CHECK(m.euler_characteristic() == 2);
    CHECK(3 * m.face_count() == 2 * static_cast<int>(m.edges().size()));
    CHECK(signed_volume(m) > 0.0);
  }
  CHECK(signed_volume(box({0.3, 0.2, 0.4})) == doctest::Approx(0.024));
}

TEST_CASE("mesh validation rejects bad faces") {
  CHECK_THROWS_AS(TriangleMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 3}}), ValidationError);
  CHECK_THROWS_AS(TriangleMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 1}}), ValidationError);
}

TEST_CASE("sample_surface examples") {
  const TriangleMesh tri({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  for (const auto& s : sample_surface(tri, 500, 7)) {
    CHECK(s.position.z() == 0.0);
    CHECK(s.position.x() >= 0.0);
    CHECK(s.position.y() >= 0.0);
    CHECK(s.position.x() + s.position.y() <= 1.0 + 1e-12);
    CHECK(s.normal.norm() == doctest::Approx(1.0).epsilon(1e-6));
  }

  // Areas 1 and 3: binomial sd at n=1e4 is ~0.0043, so 0.03 is ~7 sigma.
  const TriangleMesh two({{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {10, 0, 0}, {16, 0, 0}, {10, 1, 0}}, {{0, 1, 2}, {3, 4, 5}});
  CHECK(two.face_area(0) == doctest::Approx(1.0));
  CHECK(two.face_area(1) == doctest::Approx(3.0));
  const auto picks = pick_surface(two, 10000, 99);
  int second = 0;
  for (const auto& p : picks) second += p.face == 1;
  CHECK(std::abs(second / 10000.0 - 0.75) <= 0.03);

  const auto a = sample_surface(two, 50, 4), b = sample_surface(two, 50, 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].position == b[i].position);

  const TriangleMesh flat({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}});
  CHECK_THROWS_AS(sample_surface(flat, 10, 1), ValidationError);
}

TEST_CASE("obj and camera round trips") {
  const TriangleMesh cube = load_obj(kData + "/cube.obj");
  std::ostringstream os;
  write_obj(os, cube);
  std::istringstream is(os.str());
  const TriangleMesh back = read_obj(is);
  CHECK(back.vertices() == cube.vertices());
  CHECK(back.faces() == cube.faces());

  // Arbitrary doubles survive text exactly.
  const TriangleMesh s = transformed(icosphere(2, 0.37), Eigen::Isometry3d(Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized())));
  std::ostringstream os2;
  write_obj(os2, s);
  std::istringstream is2(os2.str());
  const TriangleMesh s2 = read_obj(is2);
  for (int i = 0; i < s.vertex_count(); ++i) CHECK((s2.vertices()[i] - s.vertices()[i]).norm() <= 1e-6);
  CHECK(s2.vertices() == s.vertices());

  const CameraView cam = load_camera(kData + "/view.cam");
  CHECK(cam.K()(0, 0) == 80.0);
  CHECK(cam.translation().z() == 1.5);
  std::ostringstream oc;
  write_camera(oc, cam);
  CHECK(oc.str() == slurp(kData + "/view.cam"));
}

TEST_CASE("malformed files give anchored errors") {
  try {
    load_obj(kData + "/zero_index.obj");
    FAIL("expected error");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("indices are 1-based") != std::string::npos);
    CHECK(msg.find(":4:") != std::string::npos);
  }
  std::istringstream bad("v 1 2\n");
  CHECK_THROWS_AS(read_obj(bad), FormatError);
  std::istringstream quad("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  CHECK_THROWS_AS(read_obj(quad), FormatError);
  std::istringstream cam("1 0 0 0 1 0 0 0\n");
  CHECK_THROWS_AS(read_camera(cam), FormatError);
}

TEST_CASE("geometry op gradients") {
  const CameraView cam = CameraView::look_at({0.3, -1.0, 0.4}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  const TriangleMesh s = icosphere(1, 0.3);
  const Tensor<double> verts = vertices_tensor<double>(s.vertices());

  auto r = check_gradients(
      [&cam](Tape<double>&, const std::vector<Var<double>>& v) { return project_points(v[0], cam); }, {verts});
  CHECK(r.passed(1e-4));

  const auto picks = pick_surface(s, 40, 5);
  auto rb = check_gradients(
      [&](Tape<double>&, const std::vector<Var<double>>& v) { return barycentric_points(v[0], s.faces(), picks); },
      {verts});
  CHECK(rb.passed(1e-4));

  std::vector<int> ids;
  for (const auto& p : picks) ids.push_back(p.face);
  auto rn = check_gradients(
      [&](Tape<double>&, const std::vector<Var<double>>& v) { return face_normals(v[0], s.faces(), ids); }, {verts});
  CHECK(rn.passed(1e-4));

  Tensor<double> feats({s.vertex_count(), 4});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (Index i = 0; i < feats.size(); ++i) feats[i] = nd(rng);
  auto rs = check_gradients(
      [&](Tape<double>&, const std::vector<Var<double>>& v) { return neighbor_sum(v[0], *s.topology()); }, {feats});
  CHECK(rs.passed(1e-4));
}

TEST_CASE("differentiable projection matches camera projection") {
  const CameraView cam = CameraView::look_at({0.3, -1.0, 0.4}, {0, 0, 0}, {0, 0, 1}, 80.0, 64, 64);
  const TriangleMesh s = icosphere(1, 0.3);
  Tape<double> tape;
  auto p = project_points(tape.constant(vertices_tensor<double>(s.vertices())), cam);
  for (int i = 0; i < s.vertex_count(); ++i) {
    const auto q = cam.project(s.vertices()[i]);
    CHECK(p.value()[3 * i] == doctest::Approx(q.pixel.x()).epsilon(1e-12));
    CHECK(p.value()[3 * i + 1] == doctest::Approx(q.pixel.y()).epsilon(1e-12));
    CHECK(p.value()[3 * i + 2] == doctest::Approx(q.depth).epsilon(1e-12));
  }
}
