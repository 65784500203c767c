#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "splatcage/cage.hpp"
#include "splatcage/camera.hpp"
#include "splatcage/image.hpp"
#include "splatcage/splat.hpp"

namespace splatcage {

// Procedural scenes, cages and benchmark setups shared by tests, the CLI and
// the benchmark harness.

/// Isotropic splats uniform in a ball.
SplatCloud sphere_cloud(int n, double radius, double splat_scale, std::uint64_t seed, double opacity = 0.8);

/// Isotropic splats uniform in a capsule whose axis is x, centered at the origin.
SplatCloud capsule_cloud(int n, double radius, double half_length, double splat_scale, std::uint64_t seed,
                         double opacity = 0.8);

/// Bends a cloud about the z axis so that the x extent [-half_length, half_length]
/// turns through `angle_deg` in total, ends curling toward +y. Covariances
/// follow the analytic Jacobian of the bend.
SplatCloud bend_cloud(const SplatCloud& cloud, double angle_deg, double half_length);

SplatCloud translate_cloud(const SplatCloud& cloud, const Vec3& offset);

/// Random splats whose values survive save_ply/load_ply bit-exactly.
SplatCloud fixture_cloud(int n, std::uint64_t seed);

/// Isotropic splats on the surface of a triangle mesh, area-weighted; each
/// splat's local z axis follows the face normal.
SplatCloud sample_mesh_surface(const CageMesh& mesh, int n, std::uint64_t seed, double opacity = 0.8);

/// Subdivided icosahedron (level 0 has 12 vertices, 20 faces), outward oriented.
CageMesh icosphere(int subdivisions, double radius, const Vec3& center = Vec3::Zero());

/// Axis-aligned box with 8 vertices and 12 faces.
CageMesh box_cage(const Vec3& lo, const Vec3& hi);

struct Benchmark {
  std::string name;
  std::shared_ptr<const SplatCloud> cloud;
  SplatCloud target_cloud;
  CageMesh cage;
  CameraView view;
  SilhouetteMask target;
};

struct BenchmarkOptions {
  int splats = 5000;
  int image_size = 256;
  int cage_vertices = 150;
  int cage_resolution = 64;
  std::uint64_t scene_seed = 7;
};

/// Sphere cloud; target is the silhouette of the same cloud moved right by
/// 10% of the image width at the depth of the look-at point.
Benchmark translation_benchmark(const BenchmarkOptions& options = {});

/// Capsule cloud; target is the silhouette of the oracle-bent (30 degrees) cloud.
Benchmark bending_benchmark(const BenchmarkOptions& options = {});

/// "translation" or "bending".
Benchmark make_benchmark(const std::string& name, const BenchmarkOptions& options = {});

}  // namespace splatcage
