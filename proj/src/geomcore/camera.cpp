#include "mvmesh/geomcore/camera.hpp"

#include "mvmesh/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <string>

namespace mvmesh {

CameraView::CameraView(const Eigen::Matrix3d& K, const Matrix34d& extrinsics, int width, int height)
    : K_(K), T_(extrinsics), width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ValidationError("camera: image size must be positive");
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) throw ValidationError("camera: fx and fy must be positive");
  if (K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0 || K(1, 0) != 0.0)
    throw ValidationError("camera: K must be upper triangular with K(2,2)=1");
  if (!(K(0, 2) >= 0.0 && K(0, 2) <= width && K(1, 2) >= 0.0 && K(1, 2) <= height))
    throw ValidationError("camera: principal point outside the image");
  const Eigen::Matrix3d R = rotation();
  if (std::abs(R.determinant() - 1.0) > 1e-6 || !(R * R.transpose()).isApprox(Eigen::Matrix3d::Identity(), 1e-6))
    throw ValidationError("camera: rotation is not orthonormal with det +1");
  if (!T_.allFinite()) throw ValidationError("camera: non-finite extrinsics");
}

CameraView CameraView::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                               double focal, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Eigen::Vector3d::UnitX());
  x.normalize();
  // Image y points down, so camera y = z cross x.
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  Matrix34d T;
  T.leftCols<3>() = R;
  T.col(3) = -R * eye;
  Eigen::Matrix3d K;
  K << focal, 0.0, width / 2.0, 0.0, focal, height / 2.0, 0.0, 0.0, 1.0;
  return {K, T, width, height};
}

Projection CameraView::project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d c = to_camera(world);
  Projection p;
  p.depth = c.z();
  p.in_front = c.z() > kMinDepth;
  const Eigen::Vector3d q = K_ * c;
  p.pixel = q.head<2>() / (p.in_front ? c.z() : kMinDepth);
  return p;
}

Eigen::Vector3d CameraView::ray(double u, double v) const {
  const Eigen::Vector3d d = K_.inverse() * Eigen::Vector3d(u, v, 1.0);
  return d / d.z();
}

Eigen::Vector3d CameraView::unproject(double u, double v, double depth) const {
  return to_world(ray(u, v) * depth);
}

CameraView CameraView::scaled(double factor) const {
  Eigen::Matrix3d K = K_;
  K.topRows<2>() *= factor;
  return {K, T_, static_cast<int>(std::lround(width_ * factor)), static_cast<int>(std::lround(height_ * factor))};
}

CameraView CameraView::rebased(const Eigen::Isometry3d& old_to_new) const {
  // x_cam = R x_old + t = R M^-1 x_new + t
  const Eigen::Isometry3d inv = old_to_new.inverse();
  Matrix34d T;
  T.leftCols<3>() = rotation() * inv.linear();
  T.col(3) = rotation() * inv.translation() + translation();
  return {K_, T, width_, height_};
}

Eigen::Matrix3d plane_homography(const CameraView& src, const CameraView& dst, double depth) {
  if (!(depth > 0.0)) throw ValidationError("plane_homography: depth must be positive");
  const double det = dst.K().determinant();
  if (std::abs(det) < 1e-12) throw ValidationError("plane_homography: singular intrinsics");
  const Eigen::Matrix3d R_rel = src.rotation() * dst.rotation().transpose();
  const Eigen::Vector3d t_rel = src.translation() - R_rel * dst.translation();
  const Eigen::RowVector3d n(0.0, 0.0, 1.0);
  return src.K() * (R_rel + t_rel * n / depth) * dst.K().inverse();
}

}  // namespace mvmesh
