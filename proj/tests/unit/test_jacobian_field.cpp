#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "splatcage/error.hpp"
#include "splatcage/jacobian_field.hpp"
#include "splatcage/rotation6d.hpp"
#include "splatcage/synthetic.hpp"

using namespace splatcage;

namespace {

Vec3 mean(const std::vector<Vec3>& v) {
  Vec3 m = Vec3::Zero();
  for (const auto& x : v) m += x;
  return m / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("rest cage has identity jacobians") {
  const CageMesh cage = icosphere(1, 1.0);
  const PoissonSystem sys(cage);
  for (const Mat3& j : sys.jacobians(DeformedCage::rest(cage))) CHECK((j - Mat3::Identity()).norm() < 1e-12);
  const DeformedCage solved = solve_cage(sys, std::vector<Mat3>(cage.num_faces(), Mat3::Identity()));
  for (std::size_t i = 0; i < cage.num_vertices(); ++i) CHECK((solved.vertices[i] - cage.vertices[i]).norm() < 1e-10);
}

TEST_CASE("random cage round trips through its jacobians") {
  const CageMesh cage = icosphere(1, 1.0);
  const PoissonSystem sys(cage);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  DeformedCage d;
  for (const auto& v : cage.vertices) d.vertices.push_back(v + Vec3(u(rng), u(rng), u(rng)));
  for (const auto& n : cage.face_normals) d.face_vectors.push_back(n + Vec3(u(rng), u(rng), u(rng)));
  const auto js = sys.jacobians(d);
  std::vector<Mat3> transforms;
  for (std::size_t t = 0; t < js.size(); ++t) transforms.push_back(js[t] * sys.rest_jacobians()[t].inverse());
  const Vec3 shift = mean(d.vertices) - mean(cage.vertices);
  const DeformedCage back = solve_cage(sys, transforms, shift);
  for (std::size_t i = 0; i < cage.num_vertices(); ++i) CHECK((back.vertices[i] - d.vertices[i]).norm() < 1e-8);
  for (std::size_t t = 0; t < cage.num_faces(); ++t) CHECK((back.face_vectors[t] - d.face_vectors[t]).norm() < 1e-8);
}

TEST_CASE("integrable fields are reproduced") {
  const CageMesh cage = icosphere(1, 1.0, Vec3(0.2, 0.1, -0.3));
  const PoissonSystem sys(cage);
  const Mat3 r = oracle::axis_angle(Vec3(1, -1, 2), 1.1);
  for (const Mat3& a : {Mat3(r), Mat3(1.7 * Mat3::Identity())}) {
    const DeformedCage out = solve_cage(sys, std::vector<Mat3>(cage.num_faces(), a));
    const Vec3 m0 = cage.vertex_mean();
    for (std::size_t i = 0; i < cage.num_vertices(); ++i) {
      CHECK((out.vertices[i] - (m0 + a * (cage.vertices[i] - m0))).norm() < 1e-6);
    }
    for (const Mat3& j : sys.jacobians(out)) CHECK((j - a).norm() < 1e-6);
  }
}

TEST_CASE("solve is stationary for the fitting energy") {
  const CageMesh cage = icosphere(1, 1.0);
  const PoissonSystem sys(cage);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.3);
  std::vector<Mat3> targets;
  for (std::size_t t = 0; t < cage.num_faces(); ++t) {
    Mat3 m = Mat3::Identity();
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) += g(rng);
    targets.push_back(m);
  }
  const DeformedCage out = solve_cage(sys, targets);
  std::vector<Mat3> tj;
  for (std::size_t t = 0; t < targets.size(); ++t) tj.push_back(targets[t] * sys.rest_jacobians()[t]);
  CHECK(sys.normal_residual(out, tj).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("solve adjoint matches finite differences") {
  const CageMesh cage = icosphere(0, 1.0);
  const PoissonSystem sys(cage);
  const std::size_t F = cage.num_faces(), V = cage.num_vertices();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<Vec3> wv(V), wf(F);
  for (auto& w : wv) w = Vec3(g(rng), g(rng), g(rng));
  for (auto& w : wf) w = Vec3(g(rng), g(rng), g(rng));
  VecX x(9 * F + 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 0.2 * g(rng);
  auto unpack = [&](const VecX& y, std::vector<Mat3>& ts, Vec3& shift) {
    ts.assign(F, Mat3::Identity());
    for (std::size_t t = 0; t < F; ++t) {
      for (int k = 0; k < 9; ++k) ts[t](k / 3, k % 3) += y[9 * t + k];
    }
    shift = y.tail<3>();
  };
  auto f = [&](const VecX& y) {
    std::vector<Mat3> ts;
    Vec3 shift;
    unpack(y, ts, shift);
    const DeformedCage c = solve_cage(sys, ts, shift);
    double s = 0.0;
    for (std::size_t i = 0; i < V; ++i) s += c.vertices[i].dot(wv[i]);
    for (std::size_t t = 0; t < F; ++t) s += c.face_vectors[t].dot(wf[t]);
    return s;
  };
  const CageGradient cg = solve_cage_adjoint(sys, wv, wf);
  VecX grad(x.size());
  for (std::size_t t = 0; t < F; ++t) {
    for (int k = 0; k < 9; ++k) grad[9 * t + k] = cg.transforms[t](k / 3, k % 3);
  }
  grad.tail<3>() = cg.translation;
  CHECK(oracle::rel_error(grad, oracle::fd_gradient(f, x, 1e-6)) < 1e-6);
}

TEST_CASE("params to transforms, polar split and adjoint") {
  const std::size_t F = 6;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  JacobianParams p = JacobianParams::identity(F);
  for (const Mat3& t : params_to_transforms(p)) CHECK(t == Mat3::Identity());
  for (std::size_t t = 0; t < F; ++t) {
    for (int k = 0; k < 6; ++k) {
      p.rot6[t][k] += 0.3 * g(rng);
      p.stretch6[t][k] += 0.1 * g(rng);
    }
  }
  const auto ts = params_to_transforms(p);
  for (std::size_t t = 0; t < F; ++t) {
    CHECK((ts[t] - rotation_from_6d(p.rot6[t]) * stretch_from_6d(p.stretch6[t])).norm() < 1e-14);
  }
  const JacobianParams back = params_from_transforms(ts, Vec3(1, 2, 3));
  CHECK(back.translation == Vec3(1, 2, 3));
  const auto ts2 = params_to_transforms(back);
  for (std::size_t t = 0; t < F; ++t) {
    CHECK((ts2[t] - ts[t]).norm() < 1e-10);
    const Mat3 s = stretch_from_6d(back.stretch6[t]);
    CHECK((s - s.transpose()).norm() == 0.0);
  }

  std::vector<Mat3> w(F);
  for (auto& m : w) {
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = g(rng);
  }
  auto flat = [&](const JacobianParams& q) {
    VecX x(12 * F);
    for (std::size_t t = 0; t < F; ++t) {
      x.segment<6>(12 * t) = q.rot6[t];
      x.segment<6>(12 * t + 6) = q.stretch6[t];
    }
    return x;
  };
  auto f = [&](const VecX& x) {
    JacobianParams q = JacobianParams::identity(F);
    for (std::size_t t = 0; t < F; ++t) {
      q.rot6[t] = x.segment<6>(12 * t);
      q.stretch6[t] = x.segment<6>(12 * t + 6);
    }
    const auto m = params_to_transforms(q);
    double s = 0.0;
    for (std::size_t t = 0; t < F; ++t) s += m[t].cwiseProduct(w[t]).sum();
    return s;
  };
  const JacobianParams adj = params_to_transforms_adjoint(p, w);
  CHECK(oracle::rel_error(flat(adj), oracle::fd_gradient(f, flat(p), 1e-6)) < 1e-6);
}

TEST_CASE("params file round trip") {
  oracle::TempDir dir("params");
  JacobianParams p = JacobianParams::identity(4);
  p.rot6[2][1] = 0.123456789012345;
  p.stretch6[3][5] = -1e-17;
  p.translation = Vec3(0.1, 0.2, 0.3);
  save_params(p, dir / "p.bin");
  const JacobianParams q = load_params(dir / "p.bin");
  CHECK(q.num_faces() == 4);
  CHECK(q.rot6[2] == p.rot6[2]);
  CHECK(q.stretch6[3] == p.stretch6[3]);
  CHECK(q.translation == p.translation);
}

TEST_CASE("disconnected cage is singular") {
  const CageMesh a = icosphere(0, 1.0), b = icosphere(0, 1.0, Vec3(4, 0, 0));
  std::vector<Vec3> v = a.vertices;
  v.insert(v.end(), b.vertices.begin(), b.vertices.end());
  std::vector<Face> f = a.faces;
  for (auto t : b.faces) f.push_back({t[0] + 12, t[1] + 12, t[2] + 12});
  try {
    build_poisson(CageMesh::from(v, f));
    FAIL("expected SingularSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSystem);
  }
}
