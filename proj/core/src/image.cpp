#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <png.h>

#include "splatcage/error.hpp"
#include "splatcage/image.hpp"

namespace splatcage {

namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

template <int C>
std::vector<std::uint8_t> encode(const Image<C>& img) {
  if (img.width <= 0 || img.height <= 0) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty image");
  std::vector<std::uint8_t> pixels(img.data.size());
  std::transform(img.data.begin(), img.data.end(), pixels.begin(), quantize);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = C == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("PNG encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

template <int C>
Image<C> decode(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::IoError, std::string("PNG decode failed: ") + png.message);
  }
  png.format = C == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(ErrorCode::IoError, std::string("PNG decode failed: ") + png.message);
  }
  Image<C> img(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < pixels.size(); ++i) img.data[i] = pixels[i] / 255.0;
  return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_png(const SilhouetteMask& mask) { return encode(mask); }
std::vector<std::uint8_t> encode_png(const RgbImage& image) { return encode(image); }
SilhouetteMask decode_png_gray(std::span<const std::uint8_t> bytes) { return decode<1>(bytes); }
RgbImage decode_png_rgb(std::span<const std::uint8_t> bytes) { return decode<3>(bytes); }

void write_png(const SilhouetteMask& mask, const std::filesystem::path& path) { write_file(encode(mask), path); }
void write_png(const RgbImage& image, const std::filesystem::path& path) { write_file(encode(image), path); }
SilhouetteMask read_png_gray(const std::filesystem::path& path) { return decode<1>(read_file(path)); }
RgbImage read_png_rgb(const std::filesystem::path& path) { return decode<3>(read_file(path)); }

namespace {
constexpr char kMaskMagic[8] = {'S', 'C', 'M', 'A', 'S', 'K', 'F', '1'};
}

void write_raw_f32(const SilhouetteMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMaskMagic, sizeof(kMaskMagic));
  const std::int32_t dims[2] = {mask.width, mask.height};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> f(mask.data.begin(), mask.data.end());
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

SilhouetteMask read_raw_f32(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMaskMagic, 8) != 0) {
    throw Error(ErrorCode::MalformedHeader, "not a raw float32 mask: " + path.string());
  }
  std::int32_t dims[2];
  std::memcpy(dims, bytes.data() + 8, sizeof(dims));
  if (dims[0] <= 0 || dims[1] <= 0 ||
      bytes.size() != 16 + static_cast<std::size_t>(dims[0]) * dims[1] * sizeof(float)) {
    throw Error(ErrorCode::MalformedHeader, "raw mask size mismatch: " + path.string());
  }
  SilhouetteMask m(dims[0], dims[1]);
  std::vector<float> f(m.pixels());
  std::memcpy(f.data(), bytes.data() + 16, f.size() * sizeof(float));
  std::copy(f.begin(), f.end(), m.data.begin());
  return m;
}

template <int C>
Image<C> gaussian_blur(const Image<C>& image, double sigma) {
  if (!(sigma > 0.0)) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) total += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (double& k : kernel) k /= total;
  const int w = image.width, h = image.height;
  Image<C> tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * image.at(std::clamp(x + k, 0, w - 1), y, c);
        tmp.at(x, y, c) = s;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp.at(x, std::clamp(y + k, 0, h - 1), c);
        out.at(x, y, c) = s;
      }
    }
  }
  return out;
}

template Image<1> gaussian_blur(const Image<1>&, double);
template Image<3> gaussian_blur(const Image<3>&, double);

RgbImage to_rgb(const SilhouetteMask& mask) {
  RgbImage out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = mask.data[i];
  }
  return out;
}

SilhouetteMask channel_mean(const RgbImage& image) {
  SilhouetteMask out(image.width, image.height);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    out.data[i] = (image.data[3 * i] + image.data[3 * i + 1] + image.data[3 * i + 2]) / 3.0;
  }
  return out;
}

SilhouetteMask threshold(const SilhouetteMask& mask, double level) {
  SilhouetteMask out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixels(); ++i) out.data[i] = mask.data[i] >= level ? 1.0 : 0.0;
  return out;
}

double mask_iou(const SilhouetteMask& a, const SilhouetteMask& b) {
  if (!a.same_size(b)) throw Error(ErrorCode::DimensionMismatch, "masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.pixels(); ++i) {
    const bool x = a.data[i] >= 0.5, y = b.data[i] >= 0.5;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SilhouetteMask fill_polygons(int width, int height, std::span<const std::vector<Vec2>> polygons) {
  SilhouetteMask out(width, height);
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double py = y + 0.5;
    xs.clear();
    for (const auto& poly : polygons) {
      const std::size_t n = poly.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if ((a.y() <= py) != (b.y() <= py)) xs.push_back(a.x() + (py - a.y()) / (b.y() - a.y()) * (b.x() - a.x()));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int x1 = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1] - 0.5)));
      for (int x = x0; x <= x1; ++x) out.at(x, y) = 1.0;
    }
  }
  return out;
}

SilhouetteMask sketch_to_target(const SilhouetteMask& sketch) { return gaussian_blur(threshold(sketch, 0.5), 1.0); }

double psnr(const RgbImage& a, const RgbImage& b) {
  if (!a.same_size(b)) throw Error(ErrorCode::DimensionMismatch, "images differ in size");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace splatcage
