#pragma once

// Small scenes and files used across the unit tests.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "splatcage/cage.hpp"
#include "splatcage/splat.hpp"

namespace fixture {

/// Raw per-vertex values as they appear in a 3DGS PLY file.
struct RawSplat {
  float x, y, z;
  float f_dc[3];
  float opacity;  // logit
  float scale[3];  // log
  float rot[4];   // w, x, y, z
};

/// Quaternion whose float32 components are unchanged by renormalization
/// followed by rounding, so a load/save cycle cannot alter them.
inline void stable_quaternion(std::mt19937_64& rng, float out[4]) {
  std::normal_distribution<double> g;
  for (;;) {
    double q[4] = {g(rng), g(rng), g(rng), g(rng)};
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    float f[4];
    for (int i = 0; i < 4; ++i) f[i] = static_cast<float>(q[i] / n);
    const double fn = std::sqrt(double(f[0]) * f[0] + double(f[1]) * f[1] + double(f[2]) * f[2] + double(f[3]) * f[3]);
    bool stable = true;
    for (int i = 0; i < 4; ++i) stable = stable && static_cast<float>(f[i] / fn) == f[i];
    if (!stable) continue;
    std::memcpy(out, f, sizeof(f));
    return;
  }
}

inline std::vector<RawSplat> random_raw_splats(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> pos(-1.0f, 1.0f), logs(-5.0f, -1.0f), logit(-4.0f, 4.0f), col(-1.0f, 1.0f);
  std::vector<RawSplat> out(n);
  for (auto& s : out) {
    s.x = pos(rng);
    s.y = pos(rng);
    s.z = pos(rng);
    for (float& c : s.f_dc) c = col(rng);
    s.opacity = logit(rng);
    for (float& c : s.scale) c = logs(rng);
    stable_quaternion(rng, s.rot);
  }
  return out;
}

/// Binary little-endian 3DGS PLY in the canonical property order.
inline std::string ply_bytes(const std::vector<RawSplat>& splats) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(splats.size()) + "\n";
  for (const char* name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
                           "rot_0", "rot_1", "rot_2", "rot_3"}) {
    out += std::string("property float ") + name + "\n";
  }
  out += "end_header\n";
  for (const auto& s : splats) {
    const float v[14] = {s.x,        s.y,        s.z,        s.f_dc[0],   s.f_dc[1], s.f_dc[2], s.opacity,
                         s.scale[0], s.scale[1], s.scale[2], s.rot[0],    s.rot[1],  s.rot[2],  s.rot[3]};
    out.append(reinterpret_cast<const char*>(v), sizeof(v));
  }
  return out;
}

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// A few isotropic splats well inside the unit ball.
inline splatcage::SplatCloud small_cloud(int n, std::uint64_t seed, double spread = 0.35, double scale = 0.12) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), o(0.4, 0.7), c(0.2, 0.9);
  splatcage::SplatCloud cloud;
  while (static_cast<int>(cloud.splats.size()) < n) {
    splatcage::Vec3 p(u(rng), u(rng), u(rng));
    if (p.norm() > 1.0) continue;
    splatcage::Splat s;
    s.mu = spread * p;
    s.scale = splatcage::Vec3(scale * (0.7 + 0.3 * std::abs(u(rng))), scale * (0.7 + 0.3 * std::abs(u(rng))),
                              scale * (0.7 + 0.3 * std::abs(u(rng))));
    s.rot = splatcage::Quat(u(rng), u(rng), u(rng), u(rng)).normalized();
    s.opacity = o(rng);
    s.color = splatcage::Vec3(c(rng), c(rng), c(rng));
    cloud.splats.push_back(s);
  }
  return cloud;
}

}  // namespace fixture
