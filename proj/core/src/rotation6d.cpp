#include "splatcage/error.hpp"
#include "splatcage/rotation6d.hpp"

namespace splatcage {

namespace {

struct GramSchmidt {
  Vec3 b1, b2;
  double n1, nu;
};

GramSchmidt orthonormalize(const Vec6& a) {
  const Vec3 a1 = a.head<3>(), a2 = a.tail<3>();
  GramSchmidt g;
  g.n1 = a1.norm();
  if (!(g.n1 > 1e-8)) throw Error(ErrorCode::DegenerateRotation, "first rotation vector vanishes");
  g.b1 = a1 / g.n1;
  const Vec3 u = a2 - g.b1.dot(a2) * g.b1;
  g.nu = u.norm();
  if (!(g.nu > 1e-8 * std::max(1.0, a2.norm()))) {
    throw Error(ErrorCode::DegenerateRotation, "rotation vectors are parallel");
  }
  g.b2 = u / g.nu;
  return g;
}

}  // namespace

Mat3 rotation_from_6d(const Vec6& a) {
  const GramSchmidt g = orthonormalize(a);
  Mat3 r;
  r.col(0) = g.b1;
  r.col(1) = g.b2;
  r.col(2) = g.b1.cross(g.b2);
  return r;
}

Vec6 rotation_from_6d_adjoint(const Vec6& a, const Mat3& grad_r) {
  const GramSchmidt g = orthonormalize(a);
  const Vec3 a2 = a.tail<3>();
  Vec3 gb1 = grad_r.col(0), gb2 = grad_r.col(1);
  const Vec3 gb3 = grad_r.col(2);
  gb1 += g.b2.cross(gb3);
  gb2 += gb3.cross(g.b1);
  const Vec3 gu = (gb2 - g.b2 * g.b2.dot(gb2)) / g.nu;
  const Vec3 ga2 = gu - g.b1 * g.b1.dot(gu);
  gb1 -= a2 * g.b1.dot(gu) + g.b1.dot(a2) * gu;
  const Vec3 ga1 = (gb1 - g.b1 * g.b1.dot(gb1)) / g.n1;
  Vec6 out;
  out << ga1, ga2;
  return out;
}

Vec6 rotation_to_6d(const Mat3& r) {
  Vec6 out;
  out << r.col(0), r.col(1);
  return out;
}

Mat3 stretch_from_6d(const Vec6& s) {
  Mat3 m;
  m << s[0], s[3], s[4],
       s[3], s[1], s[5],
       s[4], s[5], s[2];
  return m;
}

Vec6 stretch_to_6d(const Mat3& s) {
  Vec6 out;
  out << s(0, 0), s(1, 1), s(2, 2), 0.5 * (s(0, 1) + s(1, 0)), 0.5 * (s(0, 2) + s(2, 0)), 0.5 * (s(1, 2) + s(2, 1));
  return out;
}

Vec6 stretch_from_6d_adjoint(const Mat3& g) {
  Vec6 out;
  out << g(0, 0), g(1, 1), g(2, 2), g(0, 1) + g(1, 0), g(0, 2) + g(2, 0), g(1, 2) + g(2, 1);
  return out;
}

}  // namespace splatcage
