#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "splatcage/cage.hpp"
#include "splatcage/types.hpp"

namespace splatcage {

/// Regular grid of scalar samples at nodes origin + spacing * (i, j, k).
struct ScalarGrid {
  Vec3 origin = Vec3::Zero();
  double spacing = 1.0;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<double> values;  // x fastest

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 node(int i, int j, int k) const { return origin + spacing * Vec3(i, j, k); }
  double cell_diagonal() const { return spacing * std::sqrt(3.0); }
};

/// Unsigned distance from every node of a cubic-cell grid spanning [lo, hi]
/// to the nearest point. `resolution` is the node count along the longest axis.
/// No validation beyond resolution >= 2; sdf_grid is the checked entry point.
ScalarGrid distance_grid(std::span<const Vec3> points, const Vec3& lo, const Vec3& hi, int resolution);

/// Unsigned distance grid over the point bounding box padded by
/// `padding` times its longest extent on every side.
/// Throws DegenerateInput for fewer than 4 or coplanar points and
/// ResolutionOutOfRange outside [16, 512].
ScalarGrid sdf_grid(std::span<const Vec3> points, int resolution, double padding);

struct TriangleSoup {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
};

/// Oriented, watertight level set {value == iso} with normals pointing
/// toward increasing value. Nodes on the grid boundary are treated as
/// outside so the surface is always closed.
TriangleSoup isosurface(const ScalarGrid& grid, double iso);

/// Keeps only the connected component with the most faces.
TriangleSoup largest_component(const TriangleSoup& mesh);

/// Quadric-error edge collapse down to `target_vertices` (never below 8).
/// Only collapses that keep the mesh a closed, consistently oriented
/// 2-manifold without normal flips are performed.
TriangleSoup decimate(const TriangleSoup& mesh, int target_vertices);

inline constexpr int kMinCageVertices = 8;

/// Offset surface at `offset` (world units), largest component, decimated
/// to target_vertices (+-10%), validated. Throws EmptyLevelSet or NonManifoldOutput.
CageMesh extract_cage(const ScalarGrid& grid, double offset, int target_vertices);

struct CageOptions {
  int resolution = 96;
  double offset_cells = 4.0;
  int target_vertices = 500;
  double padding = 0.15;
};

/// Convenience pipeline: sdf_grid -> extract_cage with the offset in cells.
CageMesh build_cage(std::span<const Vec3> points, const CageOptions& options = {});

/// One cage per vertex budget, sharing one distance grid.
std::vector<CageMesh> cage_resolution_sweep(std::span<const Vec3> points, std::span<const int> budgets,
                                            const CageOptions& options = {});

}  // namespace splatcage
