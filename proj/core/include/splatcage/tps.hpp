#pragma once

#include <span>
#include <vector>

#include "splatcage/image.hpp"
#include "splatcage/types.hpp"

namespace splatcage {

/// 2D thin-plate spline interpolating src[i] -> dst[i].
class ThinPlateSpline {
 public:
  ThinPlateSpline(std::span<const Vec2> src, std::span<const Vec2> dst, double regularization = 0.0);
  Vec2 operator()(const Vec2& p) const;

 private:
  std::vector<Vec2> centers_;
  MatX weights_;  // n x 2
  Eigen::Matrix<double, 3, 2> affine_;
};

/// Boundary point of a binary mask along `rays` equally spaced directions
/// from `center`: the farthest inside pixel center on each ray.
std::vector<Vec2> radial_boundary(const SilhouetteMask& mask, const Vec2& center, int rays);

/// Centroid of pixels at or above 0.5 (image center for an empty mask).
Vec2 mask_centroid(const SilhouetteMask& mask);

/// Bilinear sample with clamped borders, pixel centers at +0.5.
template <int C>
Eigen::Matrix<double, C, 1> sample_bilinear(const Image<C>& img, const Vec2& p);

/// Warps `image` so that the shape `from` lands on the shape `to`:
/// out(x) = image(T(x)) with T a TPS fitted on radial boundary correspondences.
RgbImage tps_warp(const RgbImage& image, const SilhouetteMask& from, const SilhouetteMask& to, int rays = 64);

}  // namespace splatcage
