#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "splatcage/error.hpp"
#include "splatcage/rotation6d.hpp"

using namespace splatcage;

TEST_CASE("6d code gives proper rotations and inverts rotation_to_6d") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    Vec6 a;
    for (int k = 0; k < 6; ++k) a[k] = g(rng);
    const Mat3 r = rotation_from_6d(a);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
    CHECK((r.col(0) - a.head<3>().normalized()).norm() < 1e-12);
    CHECK((rotation_from_6d(rotation_to_6d(r)) - r).norm() < 1e-12);
  }
  CHECK((rotation_from_6d(identity_rot6()) - Mat3::Identity()).norm() == 0.0);
  const Mat3 r = oracle::axis_angle(Vec3(0, 0, 1), 0.5);
  CHECK((rotation_from_6d(rotation_to_6d(r)) - r).norm() < 1e-14);
}

TEST_CASE("degenerate 6d codes are rejected") {
  Vec6 a = Vec6::Zero();
  a[3] = 1;
  CHECK_THROWS_AS(rotation_from_6d(a), Error);
  a << 1, 0, 0, 2, 0, 0;
  try {
    rotation_from_6d(a);
    FAIL("expected DegenerateRotation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateRotation);
  }
}

TEST_CASE("6d adjoint matches finite differences") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    Vec6 a;
    for (int k = 0; k < 6; ++k) a[k] = g(rng);
    Mat3 w;
    for (int k = 0; k < 9; ++k) w(k / 3, k % 3) = g(rng);
    auto f = [&](const VecX& x) { return (rotation_from_6d(Vec6(x)).cwiseProduct(w)).sum(); };
    const VecX fd = oracle::fd_gradient(f, VecX(a), 1e-6);
    CHECK(oracle::rel_error(VecX(rotation_from_6d_adjoint(a, w)), fd) < 1e-6);
  }
}

TEST_CASE("stretch code round trip and adjoint") {
  Vec6 s;
  s << 1.1, 0.9, 1.3, 0.1, -0.2, 0.05;
  const Mat3 m = stretch_from_6d(s);
  CHECK(m == m.transpose());
  CHECK(m(0, 1) == 0.1);
  CHECK(m(0, 2) == -0.2);
  CHECK(m(1, 2) == 0.05);
  CHECK(stretch_to_6d(m) == s);
  CHECK(stretch_from_6d(identity_stretch6()) == Mat3::Identity());
  Mat3 w;
  w << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  auto f = [&](const VecX& x) { return stretch_from_6d(Vec6(x)).cwiseProduct(w).sum(); };
  CHECK(oracle::rel_error(VecX(stretch_from_6d_adjoint(w)), oracle::fd_gradient(f, VecX(s), 1e-6)) < 1e-8);
}
