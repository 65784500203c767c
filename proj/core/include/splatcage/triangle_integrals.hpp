#pragma once

#include <array>

#include "splatcage/types.hpp"

namespace splatcage {

/// Closed-form boundary integrals of one flat triangle seen from p.
///   single = int_t 1/|q-p| dA
///   dbl[i] = int_t lambda_i(q) (q-p).n / |q-p|^3 dA
/// with lambda_i the linear hat of corner i and n the unit normal of the
/// counter-clockwise triangle (x0, x1, x2). Gradients are with respect to p.
struct TriangleIntegrals {
  double single = 0.0;
  Vec3 grad_single = Vec3::Zero();
  std::array<double, 3> dbl{};
  std::array<Vec3, 3> grad_dbl{};
};

TriangleIntegrals triangle_integrals(const Vec3& p, const Vec3& x0, const Vec3& x1, const Vec3& x2);

}  // namespace splatcage
