#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "splatcage/error.hpp"
#include "splatcage/hash.hpp"
#include "splatcage/image.hpp"

using namespace splatcage;

TEST_CASE("png round trip at 8 bits") {
  oracle::TempDir dir("png");
  SilhouetteMask m(17, 9);
  RgbImage c(5, 7);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(i % 256) / 255.0;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] = static_cast<double>((i * 37) % 256) / 255.0;
  write_png(m, dir / "m.png");
  write_png(c, dir / "c.png");
  const SilhouetteMask m2 = read_png_gray(dir / "m.png");
  const RgbImage c2 = read_png_rgb(dir / "c.png");
  CHECK(m2.width == 17);
  CHECK(m2.height == 9);
  for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(m2.data[i] == m.data[i]);
  for (std::size_t i = 0; i < c.data.size(); ++i) CHECK(c2.data[i] == c.data[i]);
  CHECK(encode_png(m2) == encode_png(m));
  CHECK_THROWS_AS(decode_png_gray(std::vector<std::uint8_t>{1, 2, 3}), Error);
}

TEST_CASE("raw float mask round trip") {
  oracle::TempDir dir("raw");
  SilhouetteMask m(4, 3);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = 0.125 * static_cast<double>(i);
  write_raw_f32(m, dir / "m.bin");
  CHECK(read_raw_f32(dir / "m.bin").data == m.data);
}

TEST_CASE("gaussian blur against a direct convolution") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  SilhouetteMask m(20, 15);
  for (auto& v : m.data) v = u(rng);
  const double sigma = 1.5;
  const SilhouetteMask b = gaussian_blur(m, sigma);
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  double ks = 0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  for (int y = 0; y < 15; ++y) {
    for (int x = 0; x < 20; ++x) {
      double s = 0;
      for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
          const int xx = std::clamp(x + i, 0, 19), yy = std::clamp(y + j, 0, 14);
          s += k[i + r] * k[j + r] * m.at(xx, yy);
        }
      }
      CHECK(b.at(x, y) == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("mask utilities") {
  SilhouetteMask a(10, 10), b(10, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      a.at(x, y) = x < 6 ? 0.9 : 0.1;
      b.at(x, y) = x >= 3 ? 0.8 : 0.0;
    }
  }
  CHECK(mask_iou(a, b) == doctest::Approx(3.0 / 10.0));
  CHECK(mask_iou(a, a) == 1.0);
  const SilhouetteMask t = threshold(a, 0.5);
  CHECK(t.at(0, 0) == 1.0);
  CHECK(t.at(9, 0) == 0.0);
  const RgbImage rgb = to_rgb(a);
  CHECK(rgb.at(2, 2, 1) == 0.9);
  const SilhouetteMask mean = channel_mean(rgb);
  for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(mean.data[i] == doctest::Approx(a.data[i]).epsilon(1e-15));
}

TEST_CASE("polygon fill uses pixel centers and even-odd") {
  const std::vector<std::vector<Vec2>> square{{Vec2(2, 2), Vec2(8, 2), Vec2(8, 8), Vec2(2, 8)}};
  const SilhouetteMask m = fill_polygons(10, 10, square);
  double area = 0;
  for (double v : m.data) area += v;
  CHECK(area == 36.0);
  CHECK(m.at(2, 2) == 1.0);
  CHECK(m.at(8, 8) == 0.0);
  std::vector<std::vector<Vec2>> ring = square;
  ring.push_back({Vec2(4, 4), Vec2(6, 4), Vec2(6, 6), Vec2(4, 6)});
  const SilhouetteMask h = fill_polygons(10, 10, ring);
  CHECK(h.at(4, 4) == 0.0);
  CHECK(h.at(3, 3) == 1.0);
}

TEST_CASE("sketch to target binarizes then blurs") {
  SilhouetteMask s(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) s.at(x, y) = x < 8 ? 0.7 : 0.3;
  }
  const SilhouetteMask t = sketch_to_target(s);
  const SilhouetteMask expected = gaussian_blur(threshold(s, 0.5), 1.0);
  CHECK(t.data == expected.data);
  CHECK(t.at(0, 5) == doctest::Approx(1.0));
  CHECK(t.at(7, 5) > 0.5);
  CHECK(t.at(8, 5) < 0.5);
}

TEST_CASE("psnr") {
  RgbImage a(4, 4, 0.5), b(4, 4, 0.5);
  b.data[0] = 0.6;
  const double mse = 0.01 / 48.0;
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(1.0 / mse)));
}

TEST_CASE("hashing and base64") {
  CHECK(sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 251, 252, 253};
  CHECK(base64_encode(bytes) == "AAEC+vv8/Q==");
  CHECK(base64_decode("AAEC+vv8/Q==") == bytes);
  CHECK_THROWS_AS(base64_decode("@@@"), Error);
}
