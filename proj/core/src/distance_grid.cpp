#include <cmath>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <Eigen/Eigenvalues>

#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"

namespace splatcage {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, std::size_t>;

ScalarGrid distance_grid(std::span<const Vec3> points, const Vec3& lo, const Vec3& hi, int resolution) {
  if (resolution < 2) throw Error(ErrorCode::ResolutionOutOfRange, "need at least 2 nodes per axis");
  if (points.empty()) throw Error(ErrorCode::DegenerateInput, "no points");
  const Vec3 extent = hi - lo;
  const double longest = extent.maxCoeff();
  if (!(longest > 0.0)) throw Error(ErrorCode::DegenerateInput, "empty bounding box");

  ScalarGrid grid;
  grid.origin = lo;
  grid.spacing = longest / (resolution - 1);
  for (int a = 0; a < 3; ++a) {
    grid.dims[a] = std::max(2, static_cast<int>(std::ceil(extent[a] / grid.spacing - 1e-9)) + 1);
  }
  grid.values.resize(static_cast<std::size_t>(grid.dims[0]) * grid.dims[1] * grid.dims[2]);

  std::vector<Entry> entries;
  entries.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    entries.emplace_back(BPoint(points[i].x(), points[i].y(), points[i].z()), i);
  }
  const bgi::rtree<Entry, bgi::quadratic<16>> tree(entries.begin(), entries.end());

  const int nz = grid.dims[2];
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < nz; ++k) {
    std::vector<Entry> hit;
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int i = 0; i < grid.dims[0]; ++i) {
        const Vec3 x = grid.node(i, j, k);
        hit.clear();
        tree.query(bgi::nearest(BPoint(x.x(), x.y(), x.z()), 1), std::back_inserter(hit));
        grid.values[grid.index(i, j, k)] = (points[hit.front().second] - x).norm();
      }
    }
  }
  return grid;
}

ScalarGrid sdf_grid(std::span<const Vec3> points, int resolution, double padding) {
  if (resolution < 16 || resolution > 512) {
    throw Error(ErrorCode::ResolutionOutOfRange, "resolution must be in [16, 512]");
  }
  if (points.size() < 4) throw Error(ErrorCode::DegenerateInput, "need at least 4 points");
  Vec3 lo = points.front(), hi = points.front(), mean = Vec3::Zero();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    mean += p;
  }
  mean /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& p : points) scatter += (p - mean) * (p - mean).transpose();
  scatter /= static_cast<double>(points.size());
  const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(scatter, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(ev[0] > 1e-12 * ev[2]) || !(ev[2] > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "points are coplanar or collinear");
  }
  const double pad = padding * (hi - lo).maxCoeff();
  return distance_grid(points, lo - Vec3::Constant(pad), hi + Vec3::Constant(pad), resolution);
}

}  // namespace splatcage
