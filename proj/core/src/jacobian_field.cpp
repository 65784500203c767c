#include <cstring>
#include <fstream>

#include <Eigen/SVD>

#include "splatcage/error.hpp"
#include "splatcage/jacobian_field.hpp"
#include "splatcage/rotation6d.hpp"

namespace splatcage {

JacobianParams JacobianParams::identity(std::size_t num_faces) {
  JacobianParams p;
  p.rot6.assign(num_faces, identity_rot6());
  p.stretch6.assign(num_faces, identity_stretch6());
  return p;
}

std::vector<Mat3> params_to_transforms(const JacobianParams& params) {
  if (params.stretch6.size() != params.rot6.size()) {
    throw Error(ErrorCode::InvalidArgument, "rot6 and stretch6 lengths differ");
  }
  std::vector<Mat3> out(params.num_faces());
  for (std::size_t t = 0; t < out.size(); ++t) {
    try {
      out[t] = rotation_from_6d(params.rot6[t]) * stretch_from_6d(params.stretch6[t]);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), t);
    }
  }
  return out;
}

JacobianParams params_to_transforms_adjoint(const JacobianParams& params, std::span<const Mat3> grad_transforms) {
  JacobianParams g;
  g.rot6.resize(params.num_faces());
  g.stretch6.resize(params.num_faces());
  for (std::size_t t = 0; t < params.num_faces(); ++t) {
    const Mat3 r = rotation_from_6d(params.rot6[t]);
    const Mat3 s = stretch_from_6d(params.stretch6[t]);
    const Mat3& gt = grad_transforms[t];
    g.rot6[t] = rotation_from_6d_adjoint(params.rot6[t], gt * s.transpose());
    g.stretch6[t] = stretch_from_6d_adjoint(r.transpose() * gt);
  }
  return g;
}

JacobianParams params_from_transforms(std::span<const Mat3> transforms, const Vec3& translation) {
  JacobianParams p;
  p.translation = translation;
  p.rot6.resize(transforms.size());
  p.stretch6.resize(transforms.size());
  for (std::size_t t = 0; t < transforms.size(); ++t) {
    const Eigen::JacobiSVD<Mat3> svd(transforms[t], Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    Vec3 sv = svd.singularValues();
    if ((u * v.transpose()).determinant() < 0.0) {
      u.col(2) = -u.col(2);
      sv[2] = -sv[2];
    }
    const Mat3 r = u * v.transpose();
    const Mat3 s = v * sv.asDiagonal() * v.transpose();
    p.rot6[t] = rotation_to_6d(r);
    p.stretch6[t] = stretch_to_6d(s);
  }
  return p;
}

PoissonSystem::PoissonSystem(const CageMesh& cage) : cage_(cage) {
  const int nv = static_cast<int>(cage.num_vertices());
  const int nf = static_cast<int>(cage.num_faces());
  if (nv < 4 || nf < 4) throw Error(ErrorCode::SingularSystem, "cage too small");
  if (connected_components(cage.num_vertices(), cage.faces).size() != 1) {
    throw Error(ErrorCode::SingularSystem, "cage has more than one connected component");
  }
  const int n = nv + nf;

  // Corner weights: [e1 e2 b] = [x0 x1 x2 b] * C.
  Eigen::Matrix<double, 4, 3> c;
  c << -1, -1, 0,
        1,  0, 0,
        0,  1, 0,
        0,  0, 1;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nf) * 12);
  area_.resize(nf);
  rest_jacobians_.resize(nf);
  for (int t = 0; t < nf; ++t) {
    const Face& f = cage.faces[t];
    Mat3 m;
    m.col(0) = cage.vertices[f[1]] - cage.vertices[f[0]];
    m.col(1) = cage.vertices[f[2]] - cage.vertices[f[0]];
    m.col(2) = cage.face_normals[t];
    const Eigen::Matrix<double, 4, 3> d = c * m.inverse();
    const int cols[4] = {f[0], f[1], f[2], nv + t};
    for (int row = 0; row < 3; ++row) {
      for (int j = 0; j < 4; ++j) trip.emplace_back(3 * t + row, cols[j], d(j, row));
    }
    area_[t] = cage.face_areas[t];
    rest_jacobians_[t] = Mat3::Identity();
  }
  grad_.resize(3 * nf, n);
  grad_.setFromTriplets(trip.begin(), trip.end());

  VecX w(3 * nf);
  for (int t = 0; t < nf; ++t) w.segment<3>(3 * t).setConstant(area_[t]);
  const SparseMat k = grad_.transpose() * w.asDiagonal() * grad_;
  const SparseMat reduced = k.bottomRightCorner(n - 1, n - 1);
  ldlt_.compute(reduced);
  if (ldlt_.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "Poisson system factorization failed");
}

VecX PoissonSystem::solve_pinned(const VecX& rhs) const {
  const long n = static_cast<long>(num_unknowns());
  VecX x = VecX::Zero(n);
  x.tail(n - 1) = ldlt_.solve(rhs.tail(n - 1));
  if (ldlt_.info() != Eigen::Success || !x.allFinite()) throw Error(ErrorCode::SolveFailure, "Poisson solve failed");
  return x;
}

namespace {

MatX unknowns_matrix(const DeformedCage& cage) {
  const long nv = static_cast<long>(cage.vertices.size());
  MatX x(nv + static_cast<long>(cage.face_vectors.size()), 3);
  for (long v = 0; v < nv; ++v) x.row(v) = cage.vertices[v].transpose();
  for (std::size_t t = 0; t < cage.face_vectors.size(); ++t) x.row(nv + static_cast<long>(t)) = cage.face_vectors[t];
  return x;
}

// Row r of target_t placed in entries 3t..3t+2 of column r.
MatX stack_targets(std::span<const Mat3> targets) {
  MatX tau(3 * static_cast<long>(targets.size()), 3);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    tau.block<3, 3>(3 * static_cast<long>(t), 0) = targets[t].transpose();
  }
  return tau;
}

}  // namespace

std::vector<Mat3> PoissonSystem::jacobians(const DeformedCage& cage) const {
  if (cage.vertices.size() != num_vertices() || cage.face_vectors.size() != num_faces()) {
    throw Error(ErrorCode::ConnectivityMismatch, "deformed cage does not match the Poisson system");
  }
  const MatX j = grad_ * unknowns_matrix(cage);
  std::vector<Mat3> out(num_faces());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = j.block<3, 3>(3 * static_cast<long>(t), 0).transpose();
  return out;
}

MatX PoissonSystem::normal_residual(const DeformedCage& cage, std::span<const Mat3> targets) const {
  const MatX r = grad_ * unknowns_matrix(cage) - stack_targets(targets);
  VecX w(3 * static_cast<long>(num_faces()));
  for (long t = 0; t < static_cast<long>(num_faces()); ++t) w.segment<3>(3 * t).setConstant(area_[t]);
  return grad_.transpose() * (w.asDiagonal() * r);
}

PoissonSystem build_poisson(const CageMesh& cage) { return PoissonSystem(cage); }

DeformedCage solve_cage(const PoissonSystem& system, std::span<const Mat3> transforms, const Vec3& translation) {
  const std::size_t nf = system.num_faces(), nv = system.num_vertices();
  if (transforms.size() != nf) throw Error(ErrorCode::DimensionMismatch, "one transform per cage face required");
  std::vector<Mat3> targets(nf);
  for (std::size_t t = 0; t < nf; ++t) targets[t] = transforms[t] * system.rest_jacobians()[t];
  const MatX tau = stack_targets(targets);
  const VecX& a = system.face_area_weights();

  DeformedCage out;
  out.vertices.resize(nv);
  out.face_vectors.resize(nf);
  const Vec3 anchor = system.cage().vertex_mean() + translation;
  for (int r = 0; r < 3; ++r) {
    VecX wt = tau.col(r);
    for (std::size_t t = 0; t < nf; ++t) wt.segment<3>(3 * static_cast<long>(t)) *= a[static_cast<long>(t)];
    const VecX x = system.solve_pinned(system.grad_op().transpose() * wt);
    const double shift = anchor[r] - x.head(static_cast<long>(nv)).mean();
    for (std::size_t v = 0; v < nv; ++v) out.vertices[v][r] = x[static_cast<long>(v)] + shift;
    for (std::size_t t = 0; t < nf; ++t) out.face_vectors[t][r] = x[static_cast<long>(nv + t)];
  }
  return out;
}

CageGradient solve_cage_adjoint(const PoissonSystem& system, std::span<const Vec3> grad_vertices,
                                std::span<const Vec3> grad_face_vectors) {
  const std::size_t nf = system.num_faces(), nv = system.num_vertices();
  if (grad_vertices.size() != nv || (!grad_face_vectors.empty() && grad_face_vectors.size() != nf)) {
    throw Error(ErrorCode::DimensionMismatch, "upstream gradient size does not match the cage");
  }
  CageGradient out;
  out.transforms.assign(nf, Mat3::Zero());
  const VecX& a = system.face_area_weights();
  for (int r = 0; r < 3; ++r) {
    VecX g(static_cast<long>(nv + nf));
    double sum = 0.0;
    for (std::size_t v = 0; v < nv; ++v) sum += grad_vertices[v][r];
    out.translation[r] = sum;
    const double mean = sum / static_cast<double>(nv);
    for (std::size_t v = 0; v < nv; ++v) g[static_cast<long>(v)] = grad_vertices[v][r] - mean;
    for (std::size_t t = 0; t < nf; ++t) {
      g[static_cast<long>(nv + t)] = grad_face_vectors.empty() ? 0.0 : grad_face_vectors[t][r];
    }
    const VecX y = system.solve_pinned(g);
    const VecX gt = system.grad_op() * y;
    for (std::size_t t = 0; t < nf; ++t) {
      out.transforms[t].row(r) += a[static_cast<long>(t)] * gt.segment<3>(3 * static_cast<long>(t)).transpose();
    }
  }
  for (std::size_t t = 0; t < nf; ++t) out.transforms[t] *= system.rest_jacobians()[t].transpose();
  return out;
}

namespace {
constexpr char kParamsMagic[8] = {'S', 'C', 'P', 'A', 'R', 'A', 'M', '1'};
}

void save_params(const JacobianParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kParamsMagic, sizeof(kParamsMagic));
  const std::uint64_t nf = params.num_faces();
  out.write(reinterpret_cast<const char*>(&nf), sizeof(nf));
  out.write(reinterpret_cast<const char*>(params.translation.data()), 3 * sizeof(double));
  for (std::size_t t = 0; t < nf; ++t) {
    out.write(reinterpret_cast<const char*>(params.rot6[t].data()), 6 * sizeof(double));
    out.write(reinterpret_cast<const char*>(params.stretch6[t].data()), 6 * sizeof(double));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

JacobianParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[sizeof(kParamsMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::MalformedHeader, "not a params checkpoint: " + path.string());
  }
  std::uint64_t nf = 0;
  in.read(reinterpret_cast<char*>(&nf), sizeof(nf));
  JacobianParams p;
  in.read(reinterpret_cast<char*>(p.translation.data()), 3 * sizeof(double));
  if (!in || nf > (1u << 24)) throw Error(ErrorCode::MalformedHeader, "truncated params checkpoint");
  p.rot6.resize(nf);
  p.stretch6.resize(nf);
  for (std::size_t t = 0; t < nf; ++t) {
    in.read(reinterpret_cast<char*>(p.rot6[t].data()), 6 * sizeof(double));
    in.read(reinterpret_cast<char*>(p.stretch6[t].data()), 6 * sizeof(double));
  }
  if (!in) throw Error(ErrorCode::MalformedHeader, "truncated params checkpoint");
  return p;
}

}  // namespace splatcage
