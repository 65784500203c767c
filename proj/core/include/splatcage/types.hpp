#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace splatcage {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Triangle as three vertex indices, counter-clockwise when seen from outside.
using Face = std::array<int, 3>;

}  // namespace splatcage
