#pragma once

#include "splatcage/types.hpp"

namespace splatcage {

/// Orbit camera around `look_at`; y is up. Angles in degrees.
struct CameraView {
  double elevation = 0.0;
  double azimuth = 0.0;
  double radius = 4.0;
  double fov_y = 45.0;
  int width = 256;
  int height = 256;
  Vec3 look_at = Vec3::Zero();
};

/// Throws ViewInvalid when an invariant fails (size in [16, 2048],
/// fov in (10, 120), positive radius, not looking straight up or down).
void validate(const CameraView& view);

/// Pinhole camera derived from a CameraView. Camera axes are right, down,
/// forward; pixel (i, j) covers [i, i+1) x [j, j+1) with its center at +0.5.
struct Camera {
  Mat3 rotation;  // rows: right, down, forward (world -> camera)
  Vec3 position;
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  static Camera from_view(const CameraView& view);
  Vec3 to_camera(const Vec3& world) const { return rotation * (world - position); }
  /// Pixel coordinates of a camera-space point (z > 0).
  Vec2 project(const Vec3& cam) const { return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy}; }
  /// d(project)/d(cam).
  Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& cam) const;
};

inline constexpr double kNearPlane = 0.01;

}  // namespace splatcage
