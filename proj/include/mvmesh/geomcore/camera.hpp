#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mvmesh {

using Matrix34d = Eigen::Matrix<double, 3, 4>;

struct Projection {
  Eigen::Vector2d pixel;  // continuous coords, pixel (x,y) center at (x+0.5, y+0.5)
  double depth = 0.0;     // camera-frame z
  bool in_front = false;  // depth > kMinDepth
};

/// Pinhole camera: intrinsics K (pixels), world-to-camera extrinsics [R|t]
/// and image size. Immutable once constructed.
class CameraView {
 public:
  static constexpr double kMinDepth = 1e-6;

  CameraView() = default;
  /// Validates det(R)=+1 (1e-6), fx,fy>0 and a principal point inside the image.
  CameraView(const Eigen::Matrix3d& K, const Matrix34d& extrinsics, int width, int height);

  /// Camera at `eye` looking toward `target`; image x right, y down, z forward.
  static CameraView look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                            double focal, int width, int height);

  const Eigen::Matrix3d& K() const { return K_; }
  const Matrix34d& extrinsics() const { return T_; }
  Eigen::Matrix3d rotation() const { return T_.leftCols<3>(); }
  Eigen::Vector3d translation() const { return T_.col(3); }
  int width() const { return width_; }
  int height() const { return height_; }
  Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation() * world + translation(); }
  Eigen::Vector3d to_world(const Eigen::Vector3d& cam) const { return rotation().transpose() * (cam - translation()); }

  Projection project(const Eigen::Vector3d& world) const;
  /// World point at camera depth `depth` along the ray through (u,v).
  Eigen::Vector3d unproject(double u, double v, double depth) const;
  /// Camera-frame ray direction through (u,v), scaled so its z is 1.
  Eigen::Vector3d ray(double u, double v) const;

  /// Same pose, image resampled by `factor` (0.25 for a 4x smaller map).
  CameraView scaled(double factor) const;

  /// Re-expresses the camera in a new world frame: x_new = M x_old.
  CameraView rebased(const Eigen::Isometry3d& old_to_new) const;

 private:
  Eigen::Matrix3d K_ = Eigen::Matrix3d::Identity();
  Matrix34d T_ = Matrix34d::Zero();
  int width_ = 0;
  int height_ = 0;
};

/// Plane-induced homography mapping `dst` pixels to `src` pixels for the
/// fronto-parallel plane z = depth in the dst camera frame.
Eigen::Matrix3d plane_homography(const CameraView& src, const CameraView& dst, double depth);

inline Eigen::Vector2d apply_homography(const Eigen::Matrix3d& H, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = H * p.homogeneous();
  return q.hnormalized();
}

}  // namespace mvmesh
