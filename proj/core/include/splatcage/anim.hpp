#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "splatcage/camera.hpp"
#include "splatcage/cage.hpp"
#include "splatcage/jacobian_field.hpp"
#include "splatcage/optim.hpp"

namespace splatcage {

struct Keyframe {
  double time = 0.0;  // in [0, 1]
  JacobianParams params;
  DeformedCage cage;
  std::string label;  // job id, written to the manifest

  /// Keyframe whose cage is the Poisson solve of `params`.
  static Keyframe from_params(double time, JacobianParams params, const PoissonSystem& system, std::string label = {});
};

enum class InterpolationMode {
  Jacobian,        // per-face slerp of rotations, lerp of stretches, re-solve
  LinearVertices,  // lerp of vertices and face vectors
};

std::string_view to_string(InterpolationMode mode);
InterpolationMode parse_interpolation(std::string_view text);

/// Throws MismatchedCages when either keyframe does not fit `system`'s cage.
DeformedCage interpolate(const Keyframe& k0, const Keyframe& k1, double s, const PoissonSystem& system,
                         InterpolationMode mode = InterpolationMode::Jacobian);

/// Per-face transforms and translation between two parameter sets.
std::vector<Mat3> interpolate_transforms(const JacobianParams& p0, const JacobianParams& p1, double s);

/// Number of frames for fps * duration (rounded, at least 2).
int frame_count(double fps, double duration);

/// Cages of every frame; frame f sits at time f / (count - 1), so the first
/// and last frames land on the first and last keyframes.
/// Throws InsufficientKeyframes for fewer than two keyframes.
std::vector<DeformedCage> frame_cages(std::span<const Keyframe> keyframes, const PoissonSystem& system, int count,
                                      InterpolationMode mode = InterpolationMode::Jacobian);

struct SequenceOptions {
  double fps = 30.0;
  double duration = 2.0;
  CameraView view;
  Vec3 background = Vec3::Zero();
  bool write_ply = false;
  InterpolationMode mode = InterpolationMode::Jacobian;
};

struct SequenceResult {
  std::vector<std::filesystem::path> frames;
  std::vector<std::filesystem::path> plys;
  std::filesystem::path manifest;
};

/// Writes frame_%05d.png (and frame_%05d.ply on request) plus manifest.json into out_dir.
SequenceResult render_sequence(std::span<const Keyframe> keyframes, const DeformEngine& engine,
                               const SequenceOptions& options, const std::filesystem::path& out_dir);

}  // namespace splatcage
