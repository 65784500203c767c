#include "splatcage/anim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "splatcage/deform.hpp"
#include "splatcage/error.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/rotation6d.hpp"

namespace splatcage {

Keyframe Keyframe::from_params(double time, JacobianParams params, const PoissonSystem& system, std::string label) {
  Keyframe k;
  k.time = time;
  k.cage = solve_cage(system, params_to_transforms(params), params.translation);
  k.params = std::move(params);
  k.label = std::move(label);
  return k;
}

std::string_view to_string(InterpolationMode mode) {
  return mode == InterpolationMode::Jacobian ? "jacobian" : "linear";
}

InterpolationMode parse_interpolation(std::string_view text) {
  if (text == "jacobian") return InterpolationMode::Jacobian;
  if (text == "linear") return InterpolationMode::LinearVertices;
  throw Error(ErrorCode::InvalidArgument, "unknown interpolation '" + std::string(text) + "'");
}

std::vector<Mat3> interpolate_transforms(const JacobianParams& p0, const JacobianParams& p1, double s) {
  if (p0.num_faces() != p1.num_faces()) throw Error(ErrorCode::MismatchedCages, "keyframes have different face counts");
  std::vector<Mat3> out(p0.num_faces());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const Quat q0(rotation_from_6d(p0.rot6[t]));
    const Quat q1(rotation_from_6d(p1.rot6[t]));
    // Eigen's slerp flips q1 when needed, taking the shorter arc per face.
    const Mat3 r = q0.slerp(s, q1).normalized().toRotationMatrix();
    const Mat3 st = (1.0 - s) * stretch_from_6d(p0.stretch6[t]) + s * stretch_from_6d(p1.stretch6[t]);
    out[t] = r * st;
  }
  return out;
}

namespace {

void check_fits(const Keyframe& k, const PoissonSystem& system) {
  if (k.params.num_faces() != system.num_faces() || k.params.stretch6.size() != system.num_faces() ||
      k.cage.vertices.size() != system.num_vertices() || k.cage.face_vectors.size() != system.num_faces()) {
    throw Error(ErrorCode::MismatchedCages, "keyframe does not match the rest cage");
  }
}

}  // namespace

DeformedCage interpolate(const Keyframe& k0, const Keyframe& k1, double s, const PoissonSystem& system,
                         InterpolationMode mode) {
  check_fits(k0, system);
  check_fits(k1, system);
  if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidArgument, "interpolation parameter outside [0, 1]");
  if (mode == InterpolationMode::LinearVertices) {
    DeformedCage out;
    out.vertices.resize(k0.cage.vertices.size());
    out.face_vectors.resize(k0.cage.face_vectors.size());
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
      out.vertices[v] = (1.0 - s) * k0.cage.vertices[v] + s * k1.cage.vertices[v];
    }
    for (std::size_t t = 0; t < out.face_vectors.size(); ++t) {
      out.face_vectors[t] = (1.0 - s) * k0.cage.face_vectors[t] + s * k1.cage.face_vectors[t];
    }
    return out;
  }
  const std::vector<Mat3> transforms = interpolate_transforms(k0.params, k1.params, s);
  const Vec3 translation = (1.0 - s) * k0.params.translation + s * k1.params.translation;
  return solve_cage(system, transforms, translation);
}

int frame_count(double fps, double duration) {
  if (!(fps > 0.0) || !(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps and duration must be positive");
  return std::max(2, static_cast<int>(std::lround(fps * duration)));
}

std::vector<DeformedCage> frame_cages(std::span<const Keyframe> keyframes, const PoissonSystem& system, int count,
                                      InterpolationMode mode) {
  if (keyframes.size() < 2) throw Error(ErrorCode::InsufficientKeyframes, "at least two keyframes are required");
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    const double t = keyframes[i].time;
    if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "keyframe time outside [0, 1]", i);
    if (i > 0 && !(t > keyframes[i - 1].time)) {
      throw Error(ErrorCode::InvalidArgument, "keyframe times must increase strictly", i);
    }
    check_fits(keyframes[i], system);
  }
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "need at least two frames");
  std::vector<DeformedCage> out(static_cast<std::size_t>(count));
  const double t0 = keyframes.front().time, t1 = keyframes.back().time;
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int f = 0; f < count; ++f) {
    try {
      const double t = t0 + (t1 - t0) * static_cast<double>(f) / (count - 1);
      std::size_t seg = 0;
      while (seg + 2 < keyframes.size() && t > keyframes[seg + 1].time) ++seg;
      const Keyframe& a = keyframes[seg];
      const Keyframe& b = keyframes[seg + 1];
      double s = (t - a.time) / (b.time - a.time);
      s = std::clamp(s, 0.0, 1.0);
      if (f == count - 1) s = 1.0;
      out[f] = interpolate(a, b, s, system, mode);
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

SequenceResult render_sequence(std::span<const Keyframe> keyframes, const DeformEngine& engine,
                               const SequenceOptions& options, const std::filesystem::path& out_dir) {
  validate(options.view);
  const int count = frame_count(options.fps, options.duration);
  const std::vector<DeformedCage> cages = frame_cages(keyframes, engine.system(), count, options.mode);
  std::filesystem::create_directories(out_dir);

  SequenceResult result;
  result.frames.resize(cages.size());
  if (options.write_ply) result.plys.resize(cages.size());
  std::vector<std::exception_ptr> errors(cages.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (int f = 0; f < count; ++f) {
    try {
      DeformedSplats splats = transport(engine.rest_sigma(), engine.tables(), cages[f]);
      splats.source = &engine.cloud();
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05d.png", f);
      result.frames[f] = out_dir / name;
      write_png(render_color(splats, options.view, options.background), result.frames[f]);
      if (options.write_ply) {
        std::snprintf(name, sizeof(name), "frame_%05d.ply", f);
        result.plys[f] = out_dir / name;
        save_ply(export_deformed(splats).cloud, result.plys[f]);
      }
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  nlohmann::json manifest;
  manifest["fps"] = options.fps;
  manifest["duration"] = options.duration;
  manifest["frame_count"] = count;
  manifest["interpolation"] = std::string(to_string(options.mode));
  manifest["view"] = {{"elevation", options.view.elevation},
                      {"azimuth", options.view.azimuth},
                      {"radius", options.view.radius},
                      {"fov_y", options.view.fov_y},
                      {"width", options.view.width},
                      {"height", options.view.height}};
  auto& keys = manifest["keyframes"] = nlohmann::json::array();
  for (const auto& k : keyframes) keys.push_back({{"id", k.label}, {"time", k.time}});
  auto& frames = manifest["frames"] = nlohmann::json::array();
  for (const auto& p : result.frames) frames.push_back(p.filename().string());
  result.manifest = out_dir / "manifest.json";
  std::ofstream f(result.manifest);
  f << manifest.dump(2) << '\n';
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + result.manifest.string());
  return result;
}

}  // namespace splatcage
