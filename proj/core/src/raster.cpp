#include <algorithm>
#include <cmath>
#include <numeric>

#include "splatcage/error.hpp"
#include "splatcage/raster.hpp"

namespace splatcage {

namespace {

std::vector<double> opacities(const SplatCloud& cloud) {
  std::vector<double> o(cloud.count());
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = cloud.splats[i].opacity;
  return o;
}

std::vector<Vec3> colors(const SplatCloud& cloud) {
  std::vector<Vec3> c(cloud.count());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = cloud.splats[i].color;
  return c;
}

const SplatCloud& source_of(const DeformedSplats& d) {
  if (!d.source || d.source->count() != d.count()) {
    throw Error(ErrorCode::InvalidArgument, "deformed splats have no matching source cloud");
  }
  return *d.source;
}

}  // namespace

RasterPass::RasterPass(std::span<const Vec3> mu, std::span<const Mat3> sigma, std::span<const double> opacity,
                       std::span<const Vec3> color, const CameraView& view)
    : camera_(Camera::from_view(view)), num_splats_(mu.size()), sigma_(sigma.begin(), sigma.end()) {
  if (sigma.size() != mu.size() || opacity.size() != mu.size() || color.size() != mu.size()) {
    throw Error(ErrorCode::DimensionMismatch, "per-splat arrays differ in length");
  }
  const Camera& cam = camera_;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Vec3 t = cam.to_camera(mu[i]);
    if (!(t.z() > kNearPlane)) continue;
    Projected p;
    p.index = static_cast<int>(i);
    p.cam = t;
    p.mean = cam.project(t);
    p.m = cam.projection_jacobian(t) * cam.rotation;
    const Mat2 cov = p.m * sigma[i] * p.m.transpose();
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 1e-20) || !(cov(0, 0) > 0.0)) continue;
    p.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
    p.opacity = opacity[i];
    p.color = color[i];
    proj_.push_back(p);
  }
  std::sort(proj_.begin(), proj_.end(), [](const Projected& a, const Projected& b) {
    if (a.cam.z() != b.cam.z()) return a.cam.z() < b.cam.z();
    return a.index < b.index;
  });

  tiles_x_ = (cam.width + kTile - 1) / kTile;
  tiles_y_ = (cam.height + kTile - 1) / kTile;
  tiles_.assign(static_cast<std::size_t>(tiles_x_) * tiles_y_, {});
  for (std::size_t k = 0; k < proj_.size(); ++k) {
    const Projected& p = proj_[k];
    // The q <= 9 ellipse lies within 3 sqrt(lambda_max) of the mean.
    const Mat2 cov = p.m * sigma_[p.index] * p.m.transpose();
    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double lmax = mid + std::sqrt(std::max(0.0, mid * mid - (cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0))));
    const double r = 3.0 * std::sqrt(lmax) + 1.0;
    const double x0 = p.mean.x() - r, x1 = p.mean.x() + r, y0 = p.mean.y() - r, y1 = p.mean.y() + r;
    if (x1 < 0 || y1 < 0 || x0 > cam.width || y0 > cam.height) continue;
    proj_[k].x0 = std::max(0, static_cast<int>(std::floor(x0)));
    proj_[k].x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(x1)));
    proj_[k].y0 = std::max(0, static_cast<int>(std::floor(y0)));
    proj_[k].y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(y1)));
    const int tx0 = std::max(0, static_cast<int>(std::floor(x0 / kTile)));
    const int tx1 = std::min(tiles_x_ - 1, static_cast<int>(std::floor(x1 / kTile)));
    const int ty0 = std::max(0, static_cast<int>(std::floor(y0 / kTile)));
    const int ty1 = std::min(tiles_y_ - 1, static_cast<int>(std::floor(y1 / kTile)));
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) tiles_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(static_cast<int>(k));
    }
  }
}

RasterPass::RasterPass(const DeformedSplats& d, const CameraView& view)
    : RasterPass(d.mu, d.sigma, opacities(source_of(d)), colors(source_of(d)), view) {}

RasterPass::RasterPass(const SplatCloud& cloud, const CameraView& view)
    : RasterPass(centroids(cloud), covariances(cloud), opacities(cloud), colors(cloud), view) {}

template <class PixelFn>
void RasterPass::for_each_tile(PixelFn&& fn) const {
  const int n = tiles_x_ * tiles_y_;
#pragma omp parallel for schedule(dynamic, 1)
  for (int tile = 0; tile < n; ++tile) fn(tile);
}

RgbImage RasterPass::color(const Vec3& background, SilhouetteMask& alpha) const {
  const Camera& cam = camera_;
  RgbImage rgb(cam.width, cam.height);
  alpha = SilhouetteMask(cam.width, cam.height);
  for_each_tile([&](int tile) {
    const int tx = tile % tiles_x_, ty = tile / tiles_x_;
    const auto& list = tiles_[tile];
    for (int y = ty * kTile; y < std::min(cam.height, (ty + 1) * kTile); ++y) {
      for (int x = tx * kTile; x < std::min(cam.width, (tx + 1) * kTile); ++x) {
        const Vec2 pix(x + 0.5, y + 0.5);
        double trans = 1.0;
        Vec3 c = Vec3::Zero();
        for (int k : list) {
          const Projected& p = proj_[k];
          if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
          const Vec2 d = pix - p.mean;
          const double q = d.dot(p.conic * d);
          if (q > kCutoffMahalanobis2) continue;
          const double a = p.opacity * std::exp(-0.5 * q);
          c += trans * a * p.color;
          trans *= 1.0 - a;
          if (trans < kMinTransmittance) break;
        }
        alpha.at(x, y) = 1.0 - trans;
        for (int ch = 0; ch < 3; ++ch) rgb.at(x, y, ch) = c[ch] + trans * background[ch];
      }
    }
  });
  return rgb;
}

RgbImage RasterPass::color(const Vec3& background) const {
  SilhouetteMask alpha;
  return color(background, alpha);
}

SilhouetteMask RasterPass::silhouette() const {
  const Camera& cam = camera_;
  SilhouetteMask alpha(cam.width, cam.height);
  for_each_tile([&](int tile) {
    const int tx = tile % tiles_x_, ty = tile / tiles_x_;
    const auto& list = tiles_[tile];
    for (int y = ty * kTile; y < std::min(cam.height, (ty + 1) * kTile); ++y) {
      for (int x = tx * kTile; x < std::min(cam.width, (tx + 1) * kTile); ++x) {
        const Vec2 pix(x + 0.5, y + 0.5);
        double trans = 1.0;
        for (int k : list) {
          const Projected& p = proj_[k];
          if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
          const Vec2 d = pix - p.mean;
          const double q = d.dot(p.conic * d);
          if (q > kCutoffMahalanobis2) continue;
          trans *= 1.0 - p.opacity * std::exp(-0.5 * q);
          if (trans < kMinTransmittance) break;
        }
        alpha.at(x, y) = 1.0 - trans;
      }
    }
  });
  return alpha;
}

SplatGradients RasterPass::backward(const SilhouetteMask* grad_alpha, const RgbImage* grad_color,
                                    const Vec3& background) const {
  const Camera& cam = camera_;
  if ((grad_alpha && !grad_alpha->same_size(cam.width, cam.height)) ||
      (grad_color && !grad_color->same_size(cam.width, cam.height))) {
    throw Error(ErrorCode::DimensionMismatch, "upstream image size does not match the view");
  }
  struct Accum {
    Vec2 mean = Vec2::Zero();
    Mat2 conic = Mat2::Zero();
  };
  std::vector<std::vector<Accum>> per_tile(tiles_.size());

  for_each_tile([&](int tile) {
    const int tx = tile % tiles_x_, ty = tile / tiles_x_;
    const auto& list = tiles_[tile];
    auto& acc = per_tile[tile];
    acc.assign(list.size(), Accum{});
    struct Hit {
      int slot;
      double a, trans;
      Vec2 d;
    };
    std::vector<Hit> hits;
    for (int y = ty * kTile; y < std::min(cam.height, (ty + 1) * kTile); ++y) {
      for (int x = tx * kTile; x < std::min(cam.width, (tx + 1) * kTile); ++x) {
        const double ga = grad_alpha ? grad_alpha->at(x, y) : 0.0;
        const Vec3 gc = grad_color ? Vec3(grad_color->at(x, y, 0), grad_color->at(x, y, 1), grad_color->at(x, y, 2))
                                   : Vec3::Zero();
        if (ga == 0.0 && gc.isZero()) continue;
        const Vec2 pix(x + 0.5, y + 0.5);
        hits.clear();
        double trans = 1.0;
        for (std::size_t s = 0; s < list.size(); ++s) {
          const Projected& p = proj_[list[s]];
          if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
          const Vec2 d = pix - p.mean;
          const double q = d.dot(p.conic * d);
          if (q > kCutoffMahalanobis2) continue;
          const double a = p.opacity * std::exp(-0.5 * q);
          hits.push_back({static_cast<int>(s), a, trans, d});
          trans *= 1.0 - a;
          if (trans < kMinTransmittance) break;
        }
        // Walk back to front carrying the suffix transmittance and the
        // color seen behind each splat; no division by (1 - a).
        double suffix = 1.0;
        Vec3 behind = background;
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const Projected& p = proj_[list[it->slot]];
          const double dalpha = it->trans * suffix;
          const Vec3 dcolor = it->trans * (p.color - behind);
          const double g = ga * dalpha + gc.dot(dcolor);
          behind = p.color * it->a + (1.0 - it->a) * behind;
          suffix *= 1.0 - it->a;
          if (g == 0.0) continue;
          const double gq = -0.5 * it->a * g;  // dL/dq
          Accum& ac = acc[it->slot];
          ac.mean += gq * (-2.0) * (p.conic * it->d);
          ac.conic += gq * it->d * it->d.transpose();
        }
      }
    }
  });

  // Reduce in tile order so the result does not depend on scheduling.
  std::vector<Vec2> g_mean(proj_.size(), Vec2::Zero());
  std::vector<Mat2> g_conic(proj_.size(), Mat2::Zero());
  for (std::size_t tile = 0; tile < tiles_.size(); ++tile) {
    const auto& list = tiles_[tile];
    const auto& acc = per_tile[tile];
    for (std::size_t s = 0; s < acc.size(); ++s) {
      g_mean[list[s]] += acc[s].mean;
      g_conic[list[s]] += acc[s].conic;
    }
  }

  SplatGradients out;
  out.mu.assign(num_splats_, Vec3::Zero());
  out.sigma.assign(num_splats_, Mat3::Zero());
  for (std::size_t k = 0; k < proj_.size(); ++k) {
    const Projected& p = proj_[k];
    const Mat2 gq = 0.5 * (g_conic[k] + g_conic[k].transpose());
    const Mat2 gcov = -p.conic * gq * p.conic;  // d(A^-1) = -A^-1 dA A^-1
    const Mat3& sigma = sigma_[p.index];
    out.sigma[p.index] = p.m.transpose() * gcov * p.m;
    Vec3 gmu = p.m.transpose() * g_mean[k];

    // Covariance footprint also moves with the projection Jacobian.
    const Eigen::Matrix<double, 2, 3> gm = 2.0 * gcov * p.m * sigma;
    const Eigen::Matrix<double, 2, 3> gj = gm * cam.rotation.transpose();
    const Vec3& t = p.cam;
    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 gt;
    gt.x() = gj(0, 2) * (-cam.fx * iz2);
    gt.y() = gj(1, 2) * (-cam.fy * iz2);
    gt.z() = gj(0, 0) * (-cam.fx * iz2) + gj(0, 2) * (2.0 * cam.fx * t.x() * iz3) + gj(1, 1) * (-cam.fy * iz2) +
             gj(1, 2) * (2.0 * cam.fy * t.y() * iz3);
    gmu += cam.rotation.transpose() * gt;
    out.mu[p.index] = gmu;
  }
  return out;
}

SilhouetteMask render_silhouette(const DeformedSplats& splats, const CameraView& view) {
  return RasterPass(splats, view).silhouette();
}

SilhouetteMask render_silhouette(const SplatCloud& cloud, const CameraView& view) {
  return RasterPass(cloud, view).silhouette();
}

RgbImage render_color(const DeformedSplats& splats, const CameraView& view, const Vec3& background) {
  return RasterPass(splats, view).color(background);
}

RgbImage render_color(const SplatCloud& cloud, const CameraView& view, const Vec3& background) {
  return RasterPass(cloud, view).color(background);
}

}  // namespace splatcage
