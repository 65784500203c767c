#pragma once

// Independent reference computations for the unit and acceptance tests.
// Everything here is deliberately naive: dense quadrature, central finite
// differences, direct loops. None of it calls into the code under test
// beyond plain data types.

#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "splatcage/cage.hpp"
#include "splatcage/types.hpp"

namespace oracle {

using splatcage::CageMesh;
using splatcage::MatX;
using splatcage::Vec3;
using splatcage::VecX;

/// phi (points x vertices) and psi (points x faces) by subdividing every
/// face 4^level times and applying the 3-point edge-midpoint rule.
inline void quadrature_coordinates(const CageMesh& cage, const std::vector<Vec3>& points, int level, MatX& phi,
                                   MatX& psi) {
  const double inv4pi = 1.0 / (4.0 * M_PI);
  phi = MatX::Zero(static_cast<long>(points.size()), static_cast<long>(cage.num_vertices()));
  psi = MatX::Zero(static_cast<long>(points.size()), static_cast<long>(cage.num_faces()));
  // Sub-triangles in barycentric coordinates of the parent.
  using Bary = std::array<Vec3, 3>;
  std::vector<Bary> tris{{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}};
  for (int l = 0; l < level; ++l) {
    std::vector<Bary> next;
    for (const auto& t : tris) {
      const Vec3 a = 0.5 * (t[0] + t[1]), b = 0.5 * (t[1] + t[2]), c = 0.5 * (t[2] + t[0]);
      next.push_back({t[0], a, c});
      next.push_back({a, t[1], b});
      next.push_back({c, b, t[2]});
      next.push_back({a, b, c});
    }
    tris.swap(next);
  }
  for (std::size_t f = 0; f < cage.num_faces(); ++f) {
    const auto& face = cage.faces[f];
    const Vec3 x0 = cage.vertices[face[0]], x1 = cage.vertices[face[1]], x2 = cage.vertices[face[2]];
    const Vec3 cr = (x1 - x0).cross(x2 - x0);
    const double area = 0.5 * cr.norm();
    const Vec3 n = cr.normalized();
    const double sub_area = area / static_cast<double>(tris.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3& p = points[i];
      for (const auto& t : tris) {
        for (int m = 0; m < 3; ++m) {
          const Vec3 bary = 0.5 * (t[m] + t[(m + 1) % 3]);
          const Vec3 q = bary[0] * x0 + bary[1] * x1 + bary[2] * x2;
          const Vec3 d = q - p;
          const double r = d.norm();
          const double w = sub_area / 3.0;
          psi(static_cast<long>(i), static_cast<long>(f)) += inv4pi * w / r;
          const double k = d.dot(n) / (r * r * r);
          for (int c = 0; c < 3; ++c) phi(static_cast<long>(i), face[c]) += inv4pi * w * bary[c] * k;
        }
      }
    }
  }
}

/// Central finite-difference gradient of a scalar function.
inline VecX fd_gradient(const std::function<double(const VecX&)>& f, const VecX& x, double h) {
  VecX g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor)
inline double rel_error(const VecX& a, const VecX& b, double floor = 1e-12) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

/// Self-removing scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("splatcage-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Rotation about a unit axis by an angle in radians (Rodrigues).
inline splatcage::Mat3 axis_angle(const Vec3& axis, double angle) {
  const Vec3 k = axis.normalized();
  splatcage::Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return splatcage::Mat3::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
}

/// Rotation angle of a rotation matrix.
inline double rotation_angle(const splatcage::Mat3& r) {
  return std::acos(std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0));
}

}  // namespace oracle
