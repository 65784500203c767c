#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatcage/types.hpp"

namespace splatcage {

/// One 3D Gaussian. Scale and opacity are stored activated (exp / sigmoid
/// already applied); the PLY layer owns the raw log/logit encoding.
struct Splat {
  Vec3 mu = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Quat rot = Quat::Identity();
  double opacity = 1.0;
  Vec3 color = Vec3::Zero();  // degree-0 SH coefficient
};

enum class PlyType : std::uint8_t { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::size_t ply_type_size(PlyType type);

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  std::string type_token;  // spelling used in the header ("float", "float32", ...)
};

/// File layout carried through load/save so uninterpreted properties
/// (normals, higher-order SH, custom fields) survive a round trip untouched.
struct PlyLayout {
  std::vector<std::string> header_comments;  // "comment ..." / "obj_info ..." lines
  std::vector<PlyProperty> properties;       // file order
  std::size_t extra_stride = 0;              // bytes of uninterpreted properties per vertex
};

struct SplatCloud {
  std::vector<Splat> splats;
  PlyLayout layout;                 // empty properties => canonical layout on save
  std::vector<std::uint8_t> extra;  // splats.size() * layout.extra_stride bytes

  std::size_t count() const { return splats.size(); }
  bool empty() const { return splats.empty(); }
};

Mat3 rotation_matrix(const Quat& q);

/// R * S * S^T * R^T.
Mat3 covariance(const Vec3& scale, const Quat& rot);
inline Mat3 covariance(const Splat& s) { return covariance(s.scale, s.rot); }

struct ScaleRotation {
  Vec3 scale;
  Quat rot;
};

/// Inverse of covariance(): eigen-decomposition with a proper rotation.
/// Throws NotSPD when M is not symmetric or its smallest eigenvalue falls
/// under the 1e-12 relative floor.
ScaleRotation decompose_covariance(const Mat3& m);

/// Eigenvalue-clamping variant used when exporting deformed splats.
/// Eigenvalues below `floor` are raised to it; returns true if clamping happened.
bool decompose_covariance_clamped(const Mat3& m, double floor, ScaleRotation& out);

/// Throws on any Splat invariant violation (non-unit quaternion, non-positive scale).
void validate(const SplatCloud& cloud);

std::vector<Vec3> centroids(const SplatCloud& cloud);
std::vector<Mat3> covariances(const SplatCloud& cloud);

SplatCloud load_ply(const std::filesystem::path& path);
SplatCloud parse_ply(std::span<const std::uint8_t> bytes);
void save_ply(const SplatCloud& cloud, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_ply(const SplatCloud& cloud);

}  // namespace splatcage
