#pragma once

#include <span>
#include <vector>

#include "splatcage/camera.hpp"
#include "splatcage/deform.hpp"
#include "splatcage/image.hpp"
#include "splatcage/splat.hpp"

namespace splatcage {

struct SplatGradients {
  std::vector<Vec3> mu;
  std::vector<Mat3> sigma;
};

/// One differentiable rendering of a set of 3D Gaussians from one view.
///
/// Construction projects every splat (first-order perspective of its
/// covariance), sorts front to back by camera depth with the splat index as
/// tie-break, and bins footprints (3 sigma) into 16x16 pixel tiles. Pixel
/// alpha is 1 - prod(1 - o_i g_i(x)), the product running front to back
/// until the transmittance falls under kMinTransmittance.
class RasterPass {
 public:
  RasterPass(std::span<const Vec3> mu, std::span<const Mat3> sigma, std::span<const double> opacity,
             std::span<const Vec3> color, const CameraView& view);
  RasterPass(const DeformedSplats& splats, const CameraView& view);
  RasterPass(const SplatCloud& cloud, const CameraView& view);

  const Camera& camera() const { return camera_; }
  std::size_t visible_count() const { return proj_.size(); }

  SilhouetteMask silhouette() const;
  /// Over-operator color composite; background shows through 1 - alpha.
  RgbImage color(const Vec3& background = Vec3::Zero()) const;
  /// Both at once; `alpha` is bit-identical to silhouette().
  RgbImage color(const Vec3& background, SilhouetteMask& alpha) const;

  /// Reverse mode: dL/dmu and dL/dSigma given dL/dalpha and optionally dL/dcolor.
  /// Either upstream may be null.
  SplatGradients backward(const SilhouetteMask* grad_alpha, const RgbImage* grad_color = nullptr,
                          const Vec3& background = Vec3::Zero()) const;

  static constexpr int kTile = 16;

 private:
  struct Projected {
    int index;
    Vec3 cam;
    Vec2 mean;
    Mat2 conic;
    Eigen::Matrix<double, 2, 3> m;  // d(mean)/d(mu)
    double opacity;
    Vec3 color;
    int x0, x1, y0, y1;  // pixel rectangle holding the 3-sigma footprint
  };

  template <class PixelFn>
  void for_each_tile(PixelFn&& fn) const;

  Camera camera_;
  std::size_t num_splats_ = 0;
  std::vector<Mat3> sigma_;
  std::vector<Projected> proj_;
  int tiles_x_ = 0, tiles_y_ = 0;
  std::vector<std::vector<int>> tiles_;  // indices into proj_, front to back
};

SilhouetteMask render_silhouette(const DeformedSplats& splats, const CameraView& view);
SilhouetteMask render_silhouette(const SplatCloud& cloud, const CameraView& view);
RgbImage render_color(const DeformedSplats& splats, const CameraView& view, const Vec3& background = Vec3::Zero());
RgbImage render_color(const SplatCloud& cloud, const CameraView& view, const Vec3& background = Vec3::Zero());

/// Gaussian falloff is cut where the Mahalanobis distance exceeds 3.
inline constexpr double kCutoffMahalanobis2 = 9.0;

/// Compositing of a pixel stops once its transmittance drops below this;
/// forward and backward passes stop at the same splat.
inline constexpr double kMinTransmittance = 1e-4;

}  // namespace splatcage
