#include <doctest.h>

#include <cmath>
#include <random>

#include "splatcage/cage.hpp"
#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"
#include "splatcage/synthetic.hpp"

using namespace splatcage;

namespace {

std::vector<Vec3> ball_points(int n, double r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> pts;
  while (static_cast<int>(pts.size()) < n) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() <= 1.0) pts.push_back(r * p);
  }
  return pts;
}

}  // namespace

TEST_CASE("distance grid matches brute force") {
  const auto pts = ball_points(300, 1.0, 4);
  const ScalarGrid g = distance_grid(pts, Vec3(-1.2, -1.2, -1.2), Vec3(1.2, 1.2, 1.2), 12);
  CHECK(g.dims[0] == 12);
  for (int k = 0; k < g.dims[2]; k += 3) {
    for (int j = 0; j < g.dims[1]; j += 2) {
      for (int i = 0; i < g.dims[0]; ++i) {
        double best = 1e300;
        for (const auto& p : pts) best = std::min(best, (p - g.node(i, j, k)).norm());
        CHECK(g.at(i, j, k) == doctest::Approx(best).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("sdf grid input checks") {
  const auto pts = ball_points(100, 1.0, 1);
  CHECK_THROWS_AS(sdf_grid(std::vector<Vec3>{Vec3::Zero(), Vec3::Ones(), Vec3::UnitX()}, 32, 0.1), Error);
  std::vector<Vec3> flat;
  for (int i = 0; i < 50; ++i) flat.emplace_back(i * 0.1, (i % 7) * 0.1, 0.0);
  try {
    sdf_grid(flat, 32, 0.1);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateInput);
  }
  try {
    sdf_grid(pts, 8, 0.1);
    FAIL("expected ResolutionOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ResolutionOutOfRange);
  }
  CHECK_THROWS_AS(sdf_grid(pts, 1024, 0.1), Error);
}

TEST_CASE("isosurface of a point distance field is a closed sphere") {
  const std::vector<Vec3> pts{Vec3::Zero()};
  const ScalarGrid g = distance_grid(pts, Vec3(-1, -1, -1), Vec3(1, 1, 1), 33);
  const TriangleSoup s = isosurface(g, 0.6);
  const CageMesh mesh = CageMesh::from(s.vertices, s.faces);
  const MeshReport rep = inspect(mesh);
  CHECK(rep.closed_manifold);
  CHECK(rep.consistently_oriented);
  CHECK(rep.euler_characteristic == 2);
  // Normals toward increasing distance: outward, positive volume.
  CHECK(rep.signed_volume == doctest::Approx(4.0 / 3.0 * M_PI * 0.216).epsilon(0.05));
  for (const auto& v : s.vertices) CHECK(v.norm() == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("decimation keeps a valid manifold") {
  const std::vector<Vec3> pts{Vec3::Zero()};
  const ScalarGrid g = distance_grid(pts, Vec3(-1, -1, -1), Vec3(1, 1, 1), 33);
  const TriangleSoup s = isosurface(g, 0.6);
  for (int target : {200, 60, 8}) {
    const TriangleSoup d = decimate(s, target);
    CHECK(static_cast<int>(d.vertices.size()) <= std::max(target, kMinCageVertices) * 11 / 10);
    const MeshReport rep = inspect(CageMesh::from(d.vertices, d.faces));
    CHECK(rep.closed_manifold);
    CHECK(rep.consistently_oriented);
    CHECK(rep.euler_characteristic == 2);
    CHECK(rep.degenerate_faces == 0);
  }
}

TEST_CASE("generated cage encloses every point") {
  const auto pts = ball_points(2000, 0.5, 3);
  CageOptions opt;
  opt.resolution = 48;
  opt.target_vertices = 120;
  const CageMesh cage = build_cage(pts, opt);
  CHECK_NOTHROW(validate_cage(cage));
  CHECK(std::abs(static_cast<int>(cage.num_vertices()) - 120) <= 12);
  for (std::size_t i = 0; i < pts.size(); i += 7) {
    CHECK(winding_number(cage.vertices, cage.faces, pts[i]) == doctest::Approx(1.0).epsilon(1e-6));
  }

  const std::vector<int> budgets{200, 80};
  const auto sweep = cage_resolution_sweep(pts, budgets, opt);
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[0].num_vertices() > sweep[1].num_vertices());
}

TEST_CASE("empty level set is reported") {
  // The only point sits far outside the grid, so no node is within the offset.
  const std::vector<Vec3> pts{Vec3(10, 0, 0)};
  const ScalarGrid g = distance_grid(pts, Vec3(-1, -1, -1), Vec3(1, 1, 1), 17);
  CHECK_THROWS_AS(extract_cage(g, 0.1, 100), Error);  // under two cells
  try {
    extract_cage(g, 0.5, 100);
    FAIL("expected EmptyLevelSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyLevelSet);
  }
}
