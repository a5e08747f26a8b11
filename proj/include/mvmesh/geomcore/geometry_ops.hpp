#pragma once

// Differentiable geometric ops over vertex tensors [V,3].

#include "mvmesh/diffmath/ops.hpp"
#include "mvmesh/geomcore/camera.hpp"
#include "mvmesh/geomcore/mesh.hpp"
#include "mvmesh/geomcore/sampling.hpp"

#include <vector>

namespace mvmesh {

template <typename T>
Tensor<T> vertices_tensor(const std::vector<Eigen::Vector3d>& vertices) {
  Tensor<T> t({static_cast<Index>(vertices.size()), 3});
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (int k = 0; k < 3; ++k) t[static_cast<Index>(i) * 3 + k] = static_cast<T>(vertices[i][k]);
  return t;
}

template <typename T>
std::vector<Eigen::Vector3d> tensor_vertices(const Tensor<T>& t) {
  std::vector<Eigen::Vector3d> v(static_cast<std::size_t>(t.dim(0)));
  for (Index i = 0; i < t.dim(0); ++i) v[static_cast<std::size_t>(i)] = Eigen::Vector3d(t[3 * i], t[3 * i + 1], t[3 * i + 2]);
  return v;
}

/// Pinhole projection of [V,3] world points to [V,3] = (u, v, camera depth).
/// Depth is clamped at the camera's minimum depth inside the perspective
/// divide; u,v carry no gradient for points behind the camera.
template <typename T>
Var<T> project_points(const Var<T>& points, const CameraView& cam) {
  const Tensor<T>& p = points.value();
  if (p.rank() != 2 || p.dim(1) != 3) throw ShapeError("project_points: expected [V,3], got " + shape_str(p.shape()));
  const Index n = p.dim(0);
  const Eigen::Matrix3d R = cam.rotation();
  const Eigen::Vector3d t = cam.translation();
  const Eigen::Matrix3d& K = cam.K();
  Tensor<T> out({n, 3});
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector3d c = R * Eigen::Vector3d(p[3 * i], p[3 * i + 1], p[3 * i + 2]) + t;
    const double z = std::max(c.z(), CameraView::kMinDepth);
    const Eigen::Vector3d q = K * c;
    out[3 * i] = static_cast<T>(q.x() / z);
    out[3 * i + 1] = static_cast<T>(q.y() / z);
    out[3 * i + 2] = static_cast<T>(c.z());
  }
  return points.tape().record(std::move(out), {points}, [points, R, t, K, n](Tape<T>& tp, Index self) {
    const Tensor<T>& g = tp.grad(self);
    const Tensor<T>& p = points.value();
    VectorX<T> gp(points.size());
    for (Index i = 0; i < n; ++i) {
      const Eigen::Vector3d c = R * Eigen::Vector3d(p[3 * i], p[3 * i + 1], p[3 * i + 2]) + t;
      Eigen::Vector3d gc(0.0, 0.0, static_cast<double>(g[3 * i + 2]));
      if (c.z() > CameraView::kMinDepth) {
        const double z = c.z();
        const Eigen::Vector3d q = K * c;
        const double u = q.x() / z, v = q.y() / z;
        const Eigen::Vector3d du = (K.row(0).transpose() - u * Eigen::Vector3d::UnitZ()) / z;
        const Eigen::Vector3d dv = (K.row(1).transpose() - v * Eigen::Vector3d::UnitZ()) / z;
        gc += static_cast<double>(g[3 * i]) * du + static_cast<double>(g[3 * i + 1]) * dv;
      }
      const Eigen::Vector3d gw = R.transpose() * gc;
      for (int k = 0; k < 3; ++k) gp[3 * i + k] = static_cast<T>(gw[k]);
    }
    tp.accumulate(points, gp);
  });
}

/// Positions of surface picks as barycentric combinations of face corners.
template <typename T>
Var<T> barycentric_points(const Var<T>& vertices, const std::vector<Face>& faces, const std::vector<SurfacePick>& picks) {
  const Tensor<T>& v = vertices.value();
  const Index n = static_cast<Index>(picks.size());
  Tensor<T> out({n, 3});
  for (Index s = 0; s < n; ++s) {
    const auto& pk = picks[static_cast<std::size_t>(s)];
    const Face& f = faces[static_cast<std::size_t>(pk.face)];
    for (int k = 0; k < 3; ++k)
      out[3 * s + k] = static_cast<T>(pk.bary[0]) * v[3 * f[0] + k] + static_cast<T>(pk.bary[1]) * v[3 * f[1] + k] +
                       static_cast<T>(pk.bary[2]) * v[3 * f[2] + k];
  }
  return vertices.tape().record(std::move(out), {vertices}, [vertices, faces, picks](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    VectorX<T> gv = VectorX<T>::Zero(vertices.size());
    for (std::size_t s = 0; s < picks.size(); ++s) {
      const Face& f = faces[static_cast<std::size_t>(picks[s].face)];
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k)
          gv[3 * f[static_cast<std::size_t>(c)] + k] += static_cast<T>(picks[s].bary[c]) * g[3 * static_cast<Index>(s) + k];
    }
    t.accumulate(vertices, gv);
  });
}

/// Unit face normals (b-a)x(c-a)/|.| for the listed faces, [S,3].
template <typename T>
Var<T> face_normals(const Var<T>& vertices, const std::vector<Face>& faces, const std::vector<int>& face_ids) {
  const Tensor<T>& v = vertices.value();
  const Index n = static_cast<Index>(face_ids.size());
  auto corner = [&v](int idx) { return Eigen::Vector3d(v[3 * idx], v[3 * idx + 1], v[3 * idx + 2]); };
  Tensor<T> out({n, 3});
  for (Index s = 0; s < n; ++s) {
    const Face& f = faces[static_cast<std::size_t>(face_ids[static_cast<std::size_t>(s)])];
    const Eigen::Vector3d a = corner(f[0]), b = corner(f[1]), c = corner(f[2]);
    const Eigen::Vector3d cr = (b - a).cross(c - a);
    const double len = std::max(cr.norm(), 1e-30);
    for (int k = 0; k < 3; ++k) out[3 * s + k] = static_cast<T>(cr[k] / len);
  }
  return vertices.tape().record(std::move(out), {vertices}, [vertices, faces, face_ids](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& v = vertices.value();
    auto corner = [&v](int idx) { return Eigen::Vector3d(v[3 * idx], v[3 * idx + 1], v[3 * idx + 2]); };
    VectorX<T> gv = VectorX<T>::Zero(vertices.size());
    for (std::size_t s = 0; s < face_ids.size(); ++s) {
      const Face& f = faces[static_cast<std::size_t>(face_ids[s])];
      const Eigen::Vector3d a = corner(f[0]), b = corner(f[1]), c = corner(f[2]);
      const Eigen::Vector3d e1 = b - a, e2 = c - a;
      const Eigen::Vector3d cr = e1.cross(e2);
      const double len = cr.norm();
      if (len < 1e-30) continue;
      const Eigen::Vector3d nrm = cr / len;
      const Eigen::Vector3d go(g[3 * static_cast<Index>(s)], g[3 * static_cast<Index>(s) + 1], g[3 * static_cast<Index>(s) + 2]);
      // d(n)/d(cr) = (I - n n^T) / len
      const Eigen::Vector3d gcr = (go - nrm * nrm.dot(go)) / len;
      // cr = e1 x e2: d/de1 = e2 x gcr, d/de2 = gcr x e1
      const Eigen::Vector3d ge1 = e2.cross(gcr);
      const Eigen::Vector3d ge2 = gcr.cross(e1);
      for (int k = 0; k < 3; ++k) {
        gv[3 * f[1] + k] += static_cast<T>(ge1[k]);
        gv[3 * f[2] + k] += static_cast<T>(ge2[k]);
        gv[3 * f[0] + k] -= static_cast<T>(ge1[k] + ge2[k]);
      }
    }
    t.accumulate(vertices, gv);
  });
}

/// Row i of the output is the sum of rows j in N(i). Adjacency must be symmetric.
template <typename T>
Var<T> neighbor_sum(const Var<T>& features, const MeshTopology& topo) {
  const Tensor<T>& f = features.value();
  if (f.rank() != 2 || f.dim(0) != topo.vertex_count)
    throw ShapeError("neighbor_sum: features " + shape_str(f.shape()) + " for " + std::to_string(topo.vertex_count) +
                     " vertices");
  const Index C = f.dim(1);
  Tensor<T> out(f.shape());
  auto om = out.matrix();
  const auto fm = f.matrix();
  for (int i = 0; i < topo.vertex_count; ++i)
    for (int j : topo.neighbors[static_cast<std::size_t>(i)]) om.row(i) += fm.row(j);
  auto topo_ptr = &topo;
  return features.tape().record(std::move(out), {features}, [features, topo_ptr, C](Tape<T>& t, Index self) {
    const Tensor<T>& g = t.grad(self);
    Tensor<T> gf(features.shape());
    auto gm = gf.matrix();
    const auto go = g.matrix();
    for (int i = 0; i < topo_ptr->vertex_count; ++i)
      for (int j : topo_ptr->neighbors[static_cast<std::size_t>(i)]) gm.row(j) += go.row(i);
    (void)C;
    t.accumulate(features, gf.values());
  });
}

}  // namespace mvmesh
