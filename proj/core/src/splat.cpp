#include "splatcage/splat.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "splatcage/error.hpp"

namespace splatcage {

Mat3 rotation_matrix(const Quat& q) { return q.normalized().toRotationMatrix(); }

Mat3 covariance(const Vec3& scale, const Quat& rot) {
  const Mat3 m = rotation_matrix(rot) * scale.asDiagonal();
  Mat3 c = m * m.transpose();
  return 0.5 * (c + c.transpose());
}

namespace {

ScaleRotation from_eigen(const Eigen::SelfAdjointEigenSolver<Mat3>& eig, const Vec3& values) {
  Mat3 axes = eig.eigenvectors();
  if (axes.determinant() < 0.0) {
    // Eigen sorts eigenvalues ascending, so column 0 is the smallest axis.
    axes.col(0) = -axes.col(0);
  }
  ScaleRotation out;
  out.scale = values.cwiseSqrt();
  out.rot = Quat(axes).normalized();
  return out;
}

void check_symmetric(const Mat3& m) {
  const double scale = std::max(1.0, m.norm());
  if ((m - m.transpose()).norm() > 1e-8 * scale || !m.allFinite()) {
    throw Error(ErrorCode::NotSPD, "matrix is not symmetric");
  }
}

}  // namespace

ScaleRotation decompose_covariance(const Mat3& m) {
  check_symmetric(m);
  const Mat3 sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::NotSPD, "eigen-decomposition failed");
  }
  const Vec3 values = eig.eigenvalues();
  const double floor = 1e-12 * std::max(1.0, values.maxCoeff());
  if (values.minCoeff() <= floor) {
    throw Error(ErrorCode::NotSPD, "smallest eigenvalue below floor");
  }
  return from_eigen(eig, values);
}

bool decompose_covariance_clamped(const Mat3& m, double floor, ScaleRotation& out) {
  const Mat3 sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  if (eig.info() != Eigen::Success || !sym.allFinite()) {
    throw Error(ErrorCode::NotSPD, "eigen-decomposition failed");
  }
  Vec3 values = eig.eigenvalues();
  bool clamped = false;
  for (int k = 0; k < 3; ++k) {
    if (!(values[k] > floor)) {
      values[k] = floor;
      clamped = true;
    }
  }
  out = from_eigen(eig, values);
  return clamped;
}

void validate(const SplatCloud& cloud) {
  for (std::size_t i = 0; i < cloud.splats.size(); ++i) {
    const Splat& s = cloud.splats[i];
    if (std::abs(s.rot.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::NormalizationFailure, "quaternion not unit", i);
    }
    if (!(s.scale.minCoeff() > 0.0) || !s.scale.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "scale must be strictly positive", i);
    }
    if (!s.mu.allFinite() || !(s.opacity >= 0.0 && s.opacity <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite centroid or opacity out of [0,1]", i);
    }
  }
  if (!cloud.layout.properties.empty() &&
      cloud.extra.size() != cloud.layout.extra_stride * cloud.splats.size()) {
    throw Error(ErrorCode::InvalidArgument, "pass-through payload size does not match splat count");
  }
}

std::vector<Vec3> centroids(const SplatCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.count());
  for (const auto& s : cloud.splats) out.push_back(s.mu);
  return out;
}

std::vector<Mat3> covariances(const SplatCloud& cloud) {
  std::vector<Mat3> out;
  out.reserve(cloud.count());
  for (const auto& s : cloud.splats) out.push_back(covariance(s));
  return out;
}

}  // namespace splatcage
