#include <doctest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "splatcage/error.hpp"
#include "splatcage/splat.hpp"
#include "splatcage/synthetic.hpp"

using namespace splatcage;

namespace {

std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("ply values decode to activated splat fields") {
  const auto raw = fixture::random_raw_splats(20, 3);
  const SplatCloud cloud = parse_ply(as_bytes(fixture::ply_bytes(raw)));
  REQUIRE(cloud.count() == raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    const Splat& s = cloud.splats[i];
    CHECK(s.mu.x() == static_cast<double>(r.x));
    CHECK(s.color.y() == static_cast<double>(r.f_dc[1]));
    CHECK(s.opacity == doctest::Approx(1.0 / (1.0 + std::exp(-double(r.opacity)))).epsilon(1e-15));
    CHECK(s.scale.z() == doctest::Approx(std::exp(double(r.scale[2]))).epsilon(1e-15));
    CHECK(s.rot.w() == doctest::Approx(r.rot[0]).epsilon(1e-7));
    CHECK(s.rot.norm() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("ply load/save round trip is byte exact") {
  oracle::TempDir dir("ply");
  const std::string bytes = fixture::ply_bytes(fixture::random_raw_splats(64, 11));
  fixture::write_bytes(dir / "a.ply", bytes);
  const SplatCloud cloud = load_ply(dir / "a.ply");
  save_ply(cloud, dir / "b.ply");
  CHECK(fixture::read_bytes(dir / "b.ply") == bytes);

  const SplatCloud fx = fixture_cloud(50, 5);
  save_ply(fx, dir / "c.ply");
  const SplatCloud back = load_ply(dir / "c.ply");
  save_ply(back, dir / "d.ply");
  CHECK(fixture::read_bytes(dir / "c.ply") == fixture::read_bytes(dir / "d.ply"));
  for (std::size_t i = 0; i < fx.count(); ++i) {
    CHECK(back.splats[i].mu == fx.splats[i].mu);
    CHECK(back.splats[i].rot.coeffs() == fx.splats[i].rot.coeffs());
  }
}

TEST_CASE("extra ply properties and comments pass through") {
  const auto raw = fixture::random_raw_splats(5, 2);
  std::string header =
      "ply\nformat binary_little_endian 1.0\ncomment made by hand\nelement vertex 5\n"
      "property float x\nproperty float y\nproperty float z\nproperty float nx\nproperty uchar tag\n"
      "property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\nproperty float opacity\n"
      "property float scale_0\nproperty float scale_1\nproperty float scale_2\n"
      "property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\nend_header\n";
  std::string body;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& s = raw[i];
    auto put = [&](float v) { body.append(reinterpret_cast<const char*>(&v), 4); };
    put(s.x);
    put(s.y);
    put(s.z);
    put(0.25f * static_cast<float>(i));
    body.push_back(static_cast<char>(200 + i));
    for (float v : {s.f_dc[0], s.f_dc[1], s.f_dc[2], s.opacity, s.scale[0], s.scale[1], s.scale[2], s.rot[0],
                    s.rot[1], s.rot[2], s.rot[3]}) {
      put(v);
    }
  }
  const std::string file = header + body;
  const SplatCloud cloud = parse_ply(as_bytes(file));
  CHECK(cloud.layout.extra_stride == 5);
  const auto out = serialize_ply(cloud);
  CHECK(std::string(out.begin(), out.end()) == file);
}

TEST_CASE("ply errors") {
  const auto raw = fixture::random_raw_splats(3, 1);
  std::string good = fixture::ply_bytes(raw);

  CHECK(code_of([] { parse_ply(as_bytes("not a ply")); }) == ErrorCode::MalformedHeader);
  std::string ascii = good;
  ascii.replace(ascii.find("binary_little_endian"), 20, "ascii");
  CHECK(code_of([&] { parse_ply(as_bytes(ascii)); }) == ErrorCode::MalformedHeader);

  std::string missing = good;
  missing.replace(missing.find("property float opacity\n"), 23, "property float opaque\n");
  CHECK(code_of([&] { parse_ply(as_bytes(missing)); }) == ErrorCode::MissingField);

  CHECK(code_of([] { parse_ply(as_bytes(fixture::ply_bytes({}))); }) == ErrorCode::EmptyCloud);

  auto zero = raw;
  for (float& q : zero[1].rot) q = 0.0f;
  try {
    parse_ply(as_bytes(fixture::ply_bytes(zero)));
    FAIL("expected NormalizationFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NormalizationFailure);
    CHECK(e.index() == std::optional<std::size_t>(1));
  }

  std::string truncated = good.substr(0, good.size() - 4);
  CHECK(code_of([&] { parse_ply(as_bytes(truncated)); }) == ErrorCode::MalformedHeader);
  CHECK(code_of([] { load_ply("/nonexistent/file.ply"); }) == ErrorCode::IoError);
  CHECK(code_of([] { serialize_ply(SplatCloud{}); }) == ErrorCode::EmptyCloud);
}

TEST_CASE("covariance matches R S S^T R^T and decomposes back") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1), s(0.05, 2.0);
  for (int k = 0; k < 50; ++k) {
    const Vec3 scale(s(rng), s(rng), s(rng));
    const Quat q = Quat(u(rng), u(rng), u(rng), u(rng)).normalized();
    const Mat3 r = oracle::axis_angle(q.vec(), 2.0 * std::atan2(q.vec().norm(), q.w()));
    const Mat3 expected = r * scale.asDiagonal() * scale.asDiagonal() * r.transpose();
    const Mat3 sigma = covariance(scale, q);
    CHECK((sigma - expected).norm() < 1e-12 * expected.norm());
    const ScaleRotation sr = decompose_covariance(sigma);
    CHECK(sr.rot.toRotationMatrix().determinant() == doctest::Approx(1.0));
    CHECK((covariance(sr.scale, sr.rot) - sigma).norm() < 1e-10 * sigma.norm());
  }
  Mat3 bad = Mat3::Identity();
  bad(2, 2) = -1.0;
  CHECK(code_of([&] { decompose_covariance(bad); }) == ErrorCode::NotSPD);
  Mat3 asym = Mat3::Identity();
  asym(0, 1) = 0.5;
  CHECK(code_of([&] { decompose_covariance(asym); }) == ErrorCode::NotSPD);

  ScaleRotation out;
  Mat3 thin = Mat3::Identity();
  thin(1, 1) = 1e-14;
  CHECK(decompose_covariance_clamped(thin, 1e-10, out));
  CHECK(out.scale.minCoeff() == doctest::Approx(std::sqrt(1e-10)));
}

TEST_CASE("splat validation") {
  SplatCloud cloud = fixture::small_cloud(4, 1);
  CHECK_NOTHROW(validate(cloud));
  cloud.splats[2].scale.x() = 0.0;
  try {
    validate(cloud);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.index() == std::optional<std::size_t>(2));
  }
  cloud = fixture::small_cloud(4, 1);
  cloud.splats[0].rot.coeffs() *= 2.0;
  CHECK(code_of([&] { validate(cloud); }) == ErrorCode::NormalizationFailure);
}
