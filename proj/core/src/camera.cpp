#include <cmath>

#include "splatcage/camera.hpp"
#include "splatcage/error.hpp"

namespace splatcage {

namespace {
double radians(double deg) { return deg * M_PI / 180.0; }
}  // namespace

void validate(const CameraView& v) {
  if (v.width < 16 || v.width > 2048 || v.height < 16 || v.height > 2048) {
    throw Error(ErrorCode::ViewInvalid, "image size must be within [16, 2048]");
  }
  if (!(v.fov_y > 10.0 && v.fov_y < 120.0)) throw Error(ErrorCode::ViewInvalid, "fov_y must be in (10, 120)");
  if (!(v.radius > 0.0) || !std::isfinite(v.radius)) throw Error(ErrorCode::ViewInvalid, "radius must be positive");
  if (!std::isfinite(v.elevation) || !std::isfinite(v.azimuth) || !v.look_at.allFinite()) {
    throw Error(ErrorCode::ViewInvalid, "non-finite view parameters");
  }
  if (std::abs(std::cos(radians(v.elevation))) < 1e-9) {
    throw Error(ErrorCode::ViewInvalid, "view direction parallel to the up axis");
  }
}

Camera Camera::from_view(const CameraView& v) {
  validate(v);
  const double el = radians(v.elevation), az = radians(v.azimuth);
  Camera c;
  c.position = v.look_at + v.radius * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
  const Vec3 forward = (v.look_at - c.position).normalized();
  const Vec3 right = forward.cross(Vec3::UnitY()).normalized();
  const Vec3 down = forward.cross(right);
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = forward.transpose();
  c.width = v.width;
  c.height = v.height;
  c.fy = 0.5 * v.height / std::tan(0.5 * radians(v.fov_y));
  c.fx = c.fy;
  c.cx = 0.5 * v.width;
  c.cy = 0.5 * v.height;
  return c;
}

Eigen::Matrix<double, 2, 3> Camera::projection_jacobian(const Vec3& t) const {
  const double iz = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> j;
  j << fx * iz, 0.0, -fx * t.x() * iz * iz,
       0.0, fy * iz, -fy * t.y() * iz * iz;
  return j;
}

}  // namespace splatcage
