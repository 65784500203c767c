#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "splatcage/types.hpp"

namespace splatcage {

/// Row-major, channel-interleaved image of doubles.
template <int C>
struct Image {
  static constexpr int channels = C;
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<std::size_t>(w) * h * C, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  double& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * C + c]; }
  double at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * C + c]; }
  bool same_size(int w, int h) const { return width == w && height == h; }
  template <int D>
  bool same_size(const Image<D>& o) const { return width == o.width && height == o.height; }
};

using SilhouetteMask = Image<1>;
using RgbImage = Image<3>;

/// 8-bit PNG encoding (gray for masks, RGB for color); values clamped to [0, 1].
std::vector<std::uint8_t> encode_png(const SilhouetteMask& mask);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
SilhouetteMask decode_png_gray(std::span<const std::uint8_t> bytes);
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes);

void write_png(const SilhouetteMask& mask, const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);
SilhouetteMask read_png_gray(const std::filesystem::path& path);
RgbImage read_png_rgb(const std::filesystem::path& path);

/// Raw float32 mask: "SCMASKF1", int32 width, int32 height, width*height floats.
void write_raw_f32(const SilhouetteMask& mask, const std::filesystem::path& path);
SilhouetteMask read_raw_f32(const std::filesystem::path& path);

/// Separable Gaussian blur, kernel radius ceil(3 sigma), clamped borders.
template <int C>
Image<C> gaussian_blur(const Image<C>& image, double sigma);

RgbImage to_rgb(const SilhouetteMask& mask);
/// Per-pixel mean over channels.
SilhouetteMask channel_mean(const RgbImage& image);
SilhouetteMask threshold(const SilhouetteMask& mask, double level);

/// Intersection over union after thresholding both masks at 0.5.
double mask_iou(const SilhouetteMask& a, const SilhouetteMask& b);

/// Binary mask of closed polygons under the even-odd rule, sampled at pixel centers.
SilhouetteMask fill_polygons(int width, int height, std::span<const std::vector<Vec2>> polygons);

/// Target mask from a sketch image: binarize at 0.5 then blur with sigma = 1 px.
SilhouetteMask sketch_to_target(const SilhouetteMask& sketch);

double psnr(const RgbImage& a, const RgbImage& b);

}  // namespace splatcage
