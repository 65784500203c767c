#pragma once

#include <span>
#include <vector>

#include "splatcage/cage.hpp"
#include "splatcage/green.hpp"
#include "splatcage/splat.hpp"

namespace splatcage {

/// Splats pushed through the cage map: mu' = f(mu), Sigma' = J Sigma J^T.
/// Opacity and color are read from `source` by the renderer.
struct DeformedSplats {
  std::vector<Vec3> mu;
  std::vector<Mat3> sigma;
  std::vector<Mat3> jacobian;  // J_f at each rest centroid
  const SplatCloud* source = nullptr;

  std::size_t count() const { return mu.size(); }
  /// Splats whose local map is inverted or crushed (det J <= 0).
  std::size_t inverted_count() const;
};

DeformedSplats transport(const SplatCloud& cloud, const CoordinateTables& tables, const DeformedCage& cage);

/// Same, for precomputed rest covariances (one per table row).
DeformedSplats transport(std::span<const Mat3> rest_sigma, const CoordinateTables& tables, const DeformedCage& cage);

/// Identity transport (mu' = mu, Sigma' = Sigma) for rendering an undeformed cloud.
DeformedSplats as_deformed(const SplatCloud& cloud);

struct CageCotangent {
  std::vector<Vec3> vertices;
  std::vector<Vec3> face_vectors;
};

/// Reverse mode of transport. grad_sigma may be empty.
CageCotangent transport_adjoint(const CoordinateTables& tables, std::span<const Mat3> rest_sigma,
                                const DeformedSplats& forward, std::span<const Vec3> grad_mu,
                                std::span<const Mat3> grad_sigma);

/// Folds face-vector gradients into vertex gradients for a cage whose face
/// vectors are the scaled deformed normals.
std::vector<Vec3> vertex_gradient(const CageMesh& rest, std::span<const Vec3> deformed_vertices,
                                  const CageCotangent& grad);

struct ExportResult {
  SplatCloud cloud;
  std::vector<std::size_t> clamped;  // splats whose covariance fell under the eigenvalue floor
};

inline constexpr double kCovarianceFloor = 1e-10;

/// Re-decomposes every Sigma' into scale and rotation. Opacity, color and
/// pass-through bytes are copied from the source cloud.
ExportResult export_deformed(const DeformedSplats& d);

}  // namespace splatcage
