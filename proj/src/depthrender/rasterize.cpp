#include "mvmesh/depthrender/rasterize.hpp"

#include "mvmesh/geomcore/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvmesh {

namespace {

constexpr double kTieTolerance = 1e-9;

bool closer(double z, int face, double best_z, int best_face) {
  if (best_face < 0) return true;
  if (z < best_z - kTieTolerance) return true;
  return std::abs(z - best_z) <= kTieTolerance && face < best_face;
}

}  // namespace

RasterBuffers rasterize(const TriangleMesh& mesh, const CameraView& cam) {
  const int w = cam.width(), h = cam.height();
  RasterBuffers out{DepthMap(w, h), std::vector<int>(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1)};
  std::vector<double> zbuf(out.face_id.size(), std::numeric_limits<double>::infinity());

  std::vector<Eigen::Vector3d> pc(mesh.vertices().size());
  std::vector<Eigen::Vector2d> px(mesh.vertices().size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    pc[i] = cam.to_camera(mesh.vertices()[i]);
    if (pc[i].z() > CameraView::kMinDepth) px[i] = (cam.K() * (pc[i] / pc[i].z())).head<2>();
  }

  const auto& faces = mesh.faces();
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    const auto& F = faces[static_cast<std::size_t>(f)];
    const std::size_t a = static_cast<std::size_t>(F[0]), b = static_cast<std::size_t>(F[1]), c = static_cast<std::size_t>(F[2]);
    if (pc[a].z() <= CameraView::kMinDepth || pc[b].z() <= CameraView::kMinDepth || pc[c].z() <= CameraView::kMinDepth)
      continue;
    const Eigen::Vector2d &p0 = px[a], &p1 = px[b], &p2 = px[c];
    const double area = (p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x();
    if (std::abs(area) < 1e-14) continue;

    const double xmin = std::min({p0.x(), p1.x(), p2.x()}), xmax = std::max({p0.x(), p1.x(), p2.x()});
    const double ymin = std::min({p0.y(), p1.y(), p2.y()}), ymax = std::max({p0.y(), p1.y(), p2.y()});
    const int x0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(xmax - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(ymax - 0.5)));
    const double iz0 = 1.0 / pc[a].z(), iz1 = 1.0 / pc[b].z(), iz2 = 1.0 / pc[c].z();

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d p(x + 0.5, y + 0.5);
        auto edge = [&](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
          return (v - u).x() * (p - u).y() - (v - u).y() * (p - u).x();
        };
        const double l0 = edge(p1, p2) / area, l1 = edge(p2, p0) / area, l2 = edge(p0, p1) / area;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        const double z = 1.0 / (l0 * iz0 + l1 * iz1 + l2 * iz2);
        const std::size_t k = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
        if (closer(z, f, zbuf[k], out.face_id[k])) {
          zbuf[k] = z;
          out.face_id[k] = f;
        }
      }
    }
  }
  for (std::size_t k = 0; k < zbuf.size(); ++k)
    if (out.face_id[k] >= 0) out.depth.values[k] = static_cast<float>(zbuf[k]);
  return out;
}

DepthMap rasterize_depth(const TriangleMesh& mesh, const CameraView& cam) { return rasterize(mesh, cam).depth; }

DepthMap raycast_depth_oracle(const TriangleMesh& mesh, const CameraView& cam) {
  DepthMap out(cam.width(), cam.height());
  std::vector<Eigen::Vector3d> pc(mesh.vertices().size());
  for (std::size_t i = 0; i < pc.size(); ++i) pc[i] = cam.to_camera(mesh.vertices()[i]);
  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (int y = 0; y < cam.height(); ++y) {
    for (int x = 0; x < cam.width(); ++x) {
      const Eigen::Vector3d dir = cam.ray(x + 0.5, y + 0.5);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& F : mesh.faces()) {
        const auto& a = pc[static_cast<std::size_t>(F[0])];
        const auto& b = pc[static_cast<std::size_t>(F[1])];
        const auto& c = pc[static_cast<std::size_t>(F[2])];
        if (a.z() <= CameraView::kMinDepth || b.z() <= CameraView::kMinDepth || c.z() <= CameraView::kMinDepth) continue;
        if (auto t = intersect_triangle(origin, dir, a, b, c)) best = std::min(best, *t);
      }
      if (std::isfinite(best)) out.at(x, y) = static_cast<float>(best);
    }
  }
  return out;
}

Image shade_normals(const TriangleMesh& mesh, const CameraView& cam, const RasterBuffers& raster) {
  Image img(raster.depth.width, raster.depth.height);
  const std::size_t plane = raster.face_id.size();
  const Eigen::Matrix3d R = cam.rotation();
  for (int y = 0; y < raster.depth.height; ++y) {
    for (int x = 0; x < raster.depth.width; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * static_cast<std::size_t>(raster.depth.width) + static_cast<std::size_t>(x);
      const int f = raster.face_id[k];
      if (f < 0) continue;
      Eigen::Vector3d n = R * mesh.face_normal(f);
      if (n.dot(cam.ray(x + 0.5, y + 0.5)) > 0.0) n = -n;
      for (std::size_t c = 0; c < 3; ++c) img.data[c * plane + k] = static_cast<float>(0.5 * (n[static_cast<Eigen::Index>(c)] + 1.0));
    }
  }
  return img;
}

}  // namespace mvmesh
