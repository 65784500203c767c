#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "splatcage/types.hpp"

namespace splatcage {

/// Closed, outward-oriented triangle mesh enclosing the scene.
struct CageMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<double> face_areas;
  std::vector<Vec3> face_normals;  // unit, outward

  /// Builds the mesh and its per-face areas/normals. Does not validate.
  static CageMesh from(std::vector<Vec3> vertices, std::vector<Face> faces);

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
  double bbox_diagonal() const;
  Vec3 vertex_mean() const;
  double signed_volume() const;
};

/// Deformed state of a cage: vertex positions a_v plus the per-face vectors
/// b_t that multiply the face coordinates. For a rest cage b_t is the unit
/// outward normal.
struct DeformedCage {
  std::vector<Vec3> vertices;
  std::vector<Vec3> face_vectors;

  static DeformedCage rest(const CageMesh& cage);
};

struct MeshReport {
  bool closed_manifold = false;  // every edge shared by exactly two faces, vertex links are disks
  bool consistently_oriented = false;
  std::size_t degenerate_faces = 0;
  std::size_t components = 0;
  long euler_characteristic = 0;
  double signed_volume = 0.0;
};

MeshReport inspect(const CageMesh& cage);

/// Throws NonManifoldOutput if any CageMesh invariant fails.
void validate_cage(const CageMesh& cage);

std::vector<Vec3> compute_face_normals(std::span<const Vec3> vertices, std::span<const Face> faces);

/// Faces whose deformed normal points against the rest normal.
std::size_t count_flipped_faces(const CageMesh& rest, std::span<const Vec3> deformed_vertices);

/// Signed solid angle subtended by triangle (a, b, c) at p; positive when p
/// sees the back (inner) side of a counter-clockwise triangle.
double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Generalized winding number (1 inside, 0 outside a closed outward mesh).
double winding_number(std::span<const Vec3> vertices, std::span<const Face> faces, const Vec3& p);

/// Unsigned distance from p to the closest point on the mesh surface.
double distance_to_mesh(std::span<const Vec3> vertices, std::span<const Face> faces, const Vec3& p);

std::vector<std::vector<int>> connected_components(std::size_t num_vertices, std::span<const Face> faces);

CageMesh load_obj(const std::filesystem::path& path);
void save_obj(const CageMesh& cage, const std::filesystem::path& path);
void save_obj(std::span<const Vec3> vertices, std::span<const Face> faces, const std::filesystem::path& path);

}  // namespace splatcage
