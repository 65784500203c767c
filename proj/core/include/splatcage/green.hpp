#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splatcage/cage.hpp"
#include "splatcage/types.hpp"

namespace splatcage {

/// Green coordinates of a fixed cage at fixed evaluation points.
/// Row i belongs to rest_points[i]. grad_phi[k] holds d/dx_k of phi.
struct CoordinateTables {
  MatX phi;                     // points x vertices
  MatX psi;                     // points x faces
  std::array<MatX, 3> grad_phi;
  std::array<MatX, 3> grad_psi;
  std::vector<Vec3> rest_points;

  std::size_t num_points() const { return static_cast<std::size_t>(phi.rows()); }
  std::size_t num_vertices() const { return static_cast<std::size_t>(phi.cols()); }
  std::size_t num_faces() const { return static_cast<std::size_t>(psi.cols()); }
};

/// Throws PointOutsideCage / NearBoundary with the offending point index.
CoordinateTables compute_tables(const CageMesh& cage, std::span<const Vec3> points);

/// Stacks deformed vertices (V x 3) and face vectors (F x 3) as matrices.
MatX vertex_matrix(const DeformedCage& cage);
MatX face_vector_matrix(const DeformedCage& cage);

std::vector<Vec3> evaluate_map(const CoordinateTables& tables, const DeformedCage& cage);
std::vector<Mat3> evaluate_jacobian(const CoordinateTables& tables, const DeformedCage& cage);

/// Stretch factor of a face from rest edges (u, v) to deformed edges (u', v').
/// Equals 1 for rigid motions and s for a uniform scale by s.
double face_stretch(const Vec3& u, const Vec3& v, const Vec3& ud, const Vec3& vd);

/// Face vectors sigma_t * n'_t for a cage known only by its deformed vertices.
std::vector<Vec3> scaled_normals(const CageMesh& rest, std::span<const Vec3> deformed);

/// Pulls gradients on scaled_normals() back to the deformed vertices.
std::vector<Vec3> scaled_normals_adjoint(const CageMesh& rest, std::span<const Vec3> deformed,
                                         std::span<const Vec3> grad_face_vectors);

/// DeformedCage from vertex positions alone, face vectors via scaled_normals().
DeformedCage deformed_from_vertices(const CageMesh& rest, std::vector<Vec3> deformed);

/// Content hash of (cage, points) used to key the table cache.
std::string tables_key(const CageMesh& cage, std::span<const Vec3> points);

void save_tables(const CoordinateTables& tables, const std::string& key, const std::filesystem::path& path);
/// nullopt when the file is missing, unreadable, or stores a different key.
std::optional<CoordinateTables> load_tables(const std::string& key, const std::filesystem::path& path);

/// compute_tables with a file cache in `cache_dir` (disabled when empty).
CoordinateTables compute_tables_cached(const CageMesh& cage, std::span<const Vec3> points,
                                       const std::filesystem::path& cache_dir);

}  // namespace splatcage
