#include <cmath>

#include "splatcage/cage.hpp"
#include "splatcage/triangle_integrals.hpp"

namespace splatcage {

TriangleIntegrals triangle_integrals(const Vec3& p, const Vec3& x0, const Vec3& x1, const Vec3& x2) {
  const std::array<Vec3, 3> x{x0, x1, x2};
  Vec3 n = (x1 - x0).cross(x2 - x0);
  const double area2 = n.norm();
  n /= area2;
  const double h = (x0 - p).dot(n);  // > 0 when p is behind the face
  const Vec3 foot = p + h * n;
  const double omega = solid_angle(p, x0, x1, x2);

  // Per-edge quantities. Edge e runs x[e] -> x[e+1]; m is its outward in-plane normal.
  std::array<Vec3, 3> m, grad_log;
  std::array<double, 3> log_len{};
  Vec3 sum_mL = Vec3::Zero(), grad_omega = Vec3::Zero();
  double single = 0.0;
  for (int e = 0; e < 3; ++e) {
    const Vec3 a = x[e] - p, b = x[(e + 1) % 3] - p;
    const Vec3 ab = b - a;
    const double len = ab.norm();
    const Vec3 dir = ab / len;
    m[e] = dir.cross(n);
    const double ra = a.norm(), rb = b.norm();
    const double s = ra + rb;
    log_len[e] = std::log((s + len) / (s - len));  // int_e ds / |q-p|
    grad_log[e] = (2.0 * len / (s * s - len * len)) * (a / ra + b / rb);
    single += (x[e] - foot).dot(m[e]) * log_len[e];
    sum_mL += m[e] * log_len[e];
    const Vec3 perp = a.cross(dir);
    grad_omega += perp / perp.squaredNorm() * (b.dot(dir) / rb - a.dot(dir) / ra);
  }

  TriangleIntegrals out;
  out.single = single - h * omega;
  out.grad_single = n * omega - sum_mL;
  for (int i = 0; i < 3; ++i) {
    const Vec3 g = n.cross(x[(i + 2) % 3] - x[(i + 1) % 3]) / area2;  // in-plane gradient of lambda_i
    const double lambda = 1.0 + g.dot(foot - x[i]);
    const double gm = g.dot(sum_mL);
    out.dbl[i] = lambda * omega - h * gm;
    Vec3 grad = g * omega + lambda * grad_omega + n * gm;
    for (int e = 0; e < 3; ++e) grad -= h * g.dot(m[e]) * grad_log[e];
    out.grad_dbl[i] = grad;
  }
  return out;
}

}  // namespace splatcage
