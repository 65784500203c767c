#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"

namespace splatcage {

CageMesh extract_cage(const ScalarGrid& grid, double offset, int target_vertices) {
  if (!(offset > 2.0 * grid.spacing)) {
    throw Error(ErrorCode::InvalidArgument, "offset must exceed two grid cells");
  }
  TriangleSoup soup = isosurface(grid, offset);
  if (soup.faces.empty()) throw Error(ErrorCode::EmptyLevelSet, "no grid node lies below the offset level");
  soup = largest_component(soup);
  soup = decimate(soup, target_vertices);
  CageMesh cage = CageMesh::from(std::move(soup.vertices), std::move(soup.faces));
  validate_cage(cage);
  return cage;
}

CageMesh build_cage(std::span<const Vec3> points, const CageOptions& options) {
  const ScalarGrid grid = sdf_grid(points, options.resolution, options.padding);
  return extract_cage(grid, options.offset_cells * grid.spacing, options.target_vertices);
}

std::vector<CageMesh> cage_resolution_sweep(std::span<const Vec3> points, std::span<const int> budgets,
                                            const CageOptions& options) {
  std::vector<CageMesh> out;
  if (budgets.empty()) return out;
  const ScalarGrid grid = sdf_grid(points, options.resolution, options.padding);
  for (int budget : budgets) {
    out.push_back(extract_cage(grid, options.offset_cells * grid.spacing, budget));
  }
  return out;
}

}  // namespace splatcage
