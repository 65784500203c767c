#include "splatcage/deform.hpp"
#include "splatcage/error.hpp"

namespace splatcage {

std::size_t DeformedSplats::inverted_count() const {
  std::size_t n = 0;
  for (const auto& j : jacobian) n += j.determinant() <= 0.0 ? 1 : 0;
  return n;
}

DeformedSplats transport(const SplatCloud& cloud, const CoordinateTables& tables, const DeformedCage& cage) {
  if (cloud.count() != tables.num_points()) {
    throw Error(ErrorCode::DimensionMismatch, "tables were not computed at this cloud's centroids");
  }
  DeformedSplats d = transport(covariances(cloud), tables, cage);
  d.source = &cloud;
  return d;
}

DeformedSplats transport(std::span<const Mat3> rest_sigma, const CoordinateTables& tables, const DeformedCage& cage) {
  if (rest_sigma.size() != tables.num_points()) {
    throw Error(ErrorCode::DimensionMismatch, "one covariance per table row required");
  }
  DeformedSplats d;
  d.mu = evaluate_map(tables, cage);
  d.jacobian = evaluate_jacobian(tables, cage);
  d.sigma.resize(d.mu.size());
  const long n = static_cast<long>(d.mu.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const Mat3 s = d.jacobian[i] * rest_sigma[i] * d.jacobian[i].transpose();
    d.sigma[i] = 0.5 * (s + s.transpose());
  }
  return d;
}

DeformedSplats as_deformed(const SplatCloud& cloud) {
  DeformedSplats d;
  d.mu = centroids(cloud);
  d.sigma = covariances(cloud);
  d.jacobian.assign(cloud.count(), Mat3::Identity());
  d.source = &cloud;
  return d;
}

CageCotangent transport_adjoint(const CoordinateTables& tables, std::span<const Mat3> rest_sigma,
                                const DeformedSplats& forward, std::span<const Vec3> grad_mu,
                                std::span<const Mat3> grad_sigma) {
  const long n = static_cast<long>(tables.num_points());
  MatX gmu(n, 3);
  for (long i = 0; i < n; ++i) gmu.row(i) = grad_mu[i].transpose();
  MatX ga = tables.phi.transpose() * gmu;
  MatX gb = tables.psi.transpose() * gmu;

  if (!grad_sigma.empty()) {
    // dL/dJ = 2 sym(G) J Sigma; column k of every dL/dJ stacked as H_k (n x 3).
    std::array<MatX, 3> h;
    for (auto& m : h) m.resize(n, 3);
    for (long i = 0; i < n; ++i) {
      const Mat3 g = grad_sigma[i] + grad_sigma[i].transpose();
      const Mat3 gj = g * forward.jacobian[i] * rest_sigma[i];
      for (int k = 0; k < 3; ++k) h[k].row(i) = gj.col(k).transpose();
    }
    for (int k = 0; k < 3; ++k) {
      ga.noalias() += tables.grad_phi[k].transpose() * h[k];
      gb.noalias() += tables.grad_psi[k].transpose() * h[k];
    }
  }

  CageCotangent out;
  out.vertices.resize(static_cast<std::size_t>(ga.rows()));
  out.face_vectors.resize(static_cast<std::size_t>(gb.rows()));
  for (long v = 0; v < ga.rows(); ++v) out.vertices[v] = ga.row(v).transpose();
  for (long t = 0; t < gb.rows(); ++t) out.face_vectors[t] = gb.row(t).transpose();
  return out;
}

std::vector<Vec3> vertex_gradient(const CageMesh& rest, std::span<const Vec3> deformed_vertices,
                                  const CageCotangent& grad) {
  std::vector<Vec3> out = scaled_normals_adjoint(rest, deformed_vertices, grad.face_vectors);
  for (std::size_t v = 0; v < out.size(); ++v) out[v] += grad.vertices[v];
  return out;
}

ExportResult export_deformed(const DeformedSplats& d) {
  if (!d.source || d.source->count() != d.count()) {
    throw Error(ErrorCode::InvalidArgument, "deformed splats have no matching source cloud");
  }
  ExportResult r;
  r.cloud = *d.source;
  for (std::size_t i = 0; i < d.count(); ++i) {
    ScaleRotation sr;
    if (decompose_covariance_clamped(d.sigma[i], kCovarianceFloor, sr)) r.clamped.push_back(i);
    Splat& s = r.cloud.splats[i];
    s.mu = d.mu[i];
    s.scale = sr.scale;
    s.rot = sr.rot;
  }
  return r;
}

}  // namespace splatcage
