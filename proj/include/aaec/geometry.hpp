#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace aaec {

/// Pinhole intrinsics in pixels. Pixel centres sit at integer coordinates.
struct Intrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 319.5;
  double cy = 239.5;

  [[nodiscard]] Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

/// Marker pose in the camera frame: X_cam = rotation * X_marker + translation.
/// The marker lies in its own z = 0 plane, x to the right and y down, so the
/// identity rotation shows it fronto-parallel and upright.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d(0.0, 0.0, 1.0);

  bool operator==(const Pose& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

/// Rotation from yaw (about camera y), pitch (about x) and roll (about z), radians.
inline Eigen::Matrix3d rotation_ypr(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

inline Eigen::Vector2d project(const Intrinsics& k, const Eigen::Vector3d& p) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

}  // namespace aaec
