#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "splatcage/error.hpp"
#include "splatcage/tps.hpp"

namespace splatcage {

namespace {
double kernel(double r2) { return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0; }  // r^2 log r
}  // namespace

ThinPlateSpline::ThinPlateSpline(std::span<const Vec2> src, std::span<const Vec2> dst, double regularization)
    : centers_(src.begin(), src.end()) {
  const long n = static_cast<long>(src.size());
  if (n < 3 || dst.size() != src.size()) throw Error(ErrorCode::InvalidArgument, "TPS needs >= 3 matching points");
  MatX a = MatX::Zero(n + 3, n + 3);
  MatX b = MatX::Zero(n + 3, 2);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) a(i, j) = kernel((src[i] - src[j]).squaredNorm());
    a(i, i) += regularization;
    a(i, n) = a(n, i) = 1.0;
    a(i, n + 1) = a(n + 1, i) = src[i].x();
    a(i, n + 2) = a(n + 2, i) = src[i].y();
    b.row(i) = dst[i].transpose();
  }
  const MatX x = a.fullPivLu().solve(b);
  weights_ = x.topRows(n);
  affine_ = x.bottomRows(3);
}

Vec2 ThinPlateSpline::operator()(const Vec2& p) const {
  Vec2 out = affine_.row(0).transpose() + p.x() * affine_.row(1).transpose() + p.y() * affine_.row(2).transpose();
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    out += kernel((p - centers_[i]).squaredNorm()) * weights_.row(static_cast<long>(i)).transpose();
  }
  return out;
}

Vec2 mask_centroid(const SilhouetteMask& mask) {
  Vec2 sum = Vec2::Zero();
  double n = 0.0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y) >= 0.5) {
        sum += Vec2(x + 0.5, y + 0.5);
        n += 1.0;
      }
    }
  }
  return n > 0.0 ? Vec2(sum / n) : Vec2(0.5 * mask.width, 0.5 * mask.height);
}

std::vector<Vec2> radial_boundary(const SilhouetteMask& mask, const Vec2& center, int rays) {
  std::vector<Vec2> out;
  const double step = 0.25;
  const double reach = std::hypot(mask.width, mask.height);
  for (int r = 0; r < rays; ++r) {
    const double theta = 2.0 * M_PI * r / rays;
    const Vec2 dir(std::cos(theta), std::sin(theta));
    Vec2 last = center;
    for (double t = 0.0; t <= reach; t += step) {
      const Vec2 p = center + t * dir;
      const int x = static_cast<int>(std::floor(p.x())), y = static_cast<int>(std::floor(p.y()));
      if (x < 0 || y < 0 || x >= mask.width || y >= mask.height) break;
      if (mask.at(x, y) >= 0.5) last = p;
    }
    out.push_back(last);
  }
  return out;
}

template <int C>
Eigen::Matrix<double, C, 1> sample_bilinear(const Image<C>& img, const Vec2& p) {
  const double fx = std::clamp(p.x() - 0.5, 0.0, img.width - 1.0);
  const double fy = std::clamp(p.y() - 0.5, 0.0, img.height - 1.0);
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double tx = fx - x0, ty = fy - y0;
  Eigen::Matrix<double, C, 1> out;
  for (int c = 0; c < C; ++c) {
    out[c] = (1 - ty) * ((1 - tx) * img.at(x0, y0, c) + tx * img.at(x1, y0, c)) +
             ty * ((1 - tx) * img.at(x0, y1, c) + tx * img.at(x1, y1, c));
  }
  return out;
}

template Eigen::Matrix<double, 1, 1> sample_bilinear(const Image<1>&, const Vec2&);
template Eigen::Matrix<double, 3, 1> sample_bilinear(const Image<3>&, const Vec2&);

RgbImage tps_warp(const RgbImage& image, const SilhouetteMask& from, const SilhouetteMask& to, int rays) {
  if (!image.same_size(from) || !image.same_size(to)) throw Error(ErrorCode::DimensionMismatch, "warp inputs differ in size");
  const auto src = radial_boundary(to, mask_centroid(to), rays);
  const auto dst = radial_boundary(from, mask_centroid(from), rays);
  // Rays can land on the same pixel for thin shapes; keep one per target point.
  std::vector<Vec2> s, d;
  std::map<std::pair<long, long>, int> seen;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto key = std::make_pair(std::lround(src[i].x() * 64), std::lround(src[i].y() * 64));
    if (seen.emplace(key, 1).second) {
      s.push_back(src[i]);
      d.push_back(dst[i]);
    }
  }
  s.push_back(mask_centroid(to));
  d.push_back(mask_centroid(from));
  if (s.size() < 3) return image;
  const ThinPlateSpline warp(s, d, 1e-9);
  RgbImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const Vec3 c = sample_bilinear(image, warp(Vec2(x + 0.5, y + 0.5)));
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = c[ch];
    }
  }
  return out;
}

}  // namespace splatcage
