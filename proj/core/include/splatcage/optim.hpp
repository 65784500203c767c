#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splatcage/camera.hpp"
#include "splatcage/cage.hpp"
#include "splatcage/deform.hpp"
#include "splatcage/green.hpp"
#include "splatcage/guidance.hpp"
#include "splatcage/image.hpp"
#include "splatcage/jacobian_field.hpp"
#include "splatcage/splat.hpp"

namespace splatcage {

/// What the optimizer moves.
///   Decomposed:     per-face rot6 + stretch6 + global translation, Poisson solve
///   DirectJacobian: per-face raw 3x3 Jacobian + global translation, Poisson solve
///   DirectVertices: cage vertex positions, face vectors from scaled normals
enum class Parameterization { Decomposed, DirectJacobian, DirectVertices };

std::string_view to_string(Parameterization p);
/// Accepts "decomposed", "jacobian", "vertices".
Parameterization parse_parameterization(std::string_view text);

struct OptimConfig {
  int iterations = 2000;
  double learning_rate = 0.002;
  double alpha = 10000.0;  // weight of the silhouette loss
  int num_random_views = 4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  double guidance_weight = 1.0;
  int checkpoint_every = 100;
  std::string prompt;
  Parameterization parameterization = Parameterization::Decomposed;
};

/// Throws InvalidArgument for out-of-range fields.
void validate(const OptimConfig& config);
std::string config_to_json(const OptimConfig& config);
/// Fields present in `json` override `base`; unknown keys are rejected.
OptimConfig config_from_json(std::string_view json, OptimConfig base = {});

/// Fixed per scene and cage: coordinate tables, Poisson factorization and
/// rest covariances. Read-only after construction.
class DeformEngine {
 public:
  DeformEngine(std::shared_ptr<const SplatCloud> cloud, CageMesh cage, const std::filesystem::path& table_cache = {});

  const SplatCloud& cloud() const { return *cloud_; }
  const CageMesh& cage() const { return cage_; }
  const CoordinateTables& tables() const { return tables_; }
  const PoissonSystem& system() const { return system_; }
  std::span<const Mat3> rest_sigma() const { return rest_sigma_; }

  struct State {
    DeformedCage cage;
    std::vector<Mat3> transforms;  // empty for DirectVertices
    DeformedSplats splats;
  };

  VecX initial_vector(Parameterization p) const;
  State forward(Parameterization p, const VecX& x) const;
  /// dL/dx from gradients on the deformed splats.
  VecX backward(Parameterization p, const VecX& x, const State& state, std::span<const Vec3> grad_mu,
                std::span<const Mat3> grad_sigma) const;
  /// Decomposed parameters that reproduce `state` through the Poisson solve.
  JacobianParams to_params(Parameterization p, const VecX& x, const State& state) const;
  /// Flat vector for Decomposed from structured parameters.
  static VecX pack(const JacobianParams& params);
  static JacobianParams unpack(const VecX& x, std::size_t num_faces);

 private:
  std::shared_ptr<const SplatCloud> cloud_;
  CageMesh cage_;
  CoordinateTables tables_;
  PoissonSystem system_;
  std::vector<Mat3> rest_sigma_;
};

struct IterationRecord {
  int iteration = 0;
  double l_sil = 0.0;
  double l_guidance = 0.0;
  double l_total = 0.0;
  std::size_t flipped_faces = 0;
  std::size_t inverted_splats = 0;
};

struct DeformJob {
  CameraView sketch_view;
  SilhouetteMask target;
  OptimConfig config;
  const GuidanceClient* guidance = nullptr;  // null: no guidance views
  RgbImage reference;                        // I_ref; derived from the guidance client when empty
  std::filesystem::path output_dir;          // checkpoints and loss.csv; empty disables
  const std::atomic<bool>* cancel = nullptr;
  std::function<void(const IterationRecord&)> on_iteration;
};

std::vector<CameraView> sample_views(const CameraView& sketch_view, int n, std::uint64_t seed);

/// Seed used for the random views of one iteration.
std::uint64_t iteration_seed(std::uint64_t seed, int iteration);

struct GradientEval {
  double l_sil = 0.0;
  double l_guidance = 0.0;
  double l_total = 0.0;
  VecX grad;
  DeformEngine::State state;
  SilhouetteMask rendered;
};

/// alpha * dL_sil/dx at the sketch view plus the guidance gradients of the
/// random views of `iteration`, chained through raster, transport and solve.
GradientEval total_gradient(const DeformEngine& engine, const DeformJob& job, const VecX& x, int iteration,
                            const RgbImage& reference);

struct DeformResult {
  VecX x;
  JacobianParams params;
  DeformEngine::State state;
  std::vector<IterationRecord> history;
  double initial_l_sil = 0.0;
  double final_l_sil = 0.0;
  SilhouetteMask final_mask;
  std::size_t max_flipped_faces = 0;
};

/// Adam over config.iterations steps. Throws NaNDetected or Cancelled.
DeformResult run(const DeformEngine& engine, const DeformJob& job);

/// Reference image for SDS requests: the guidance client's answer for the
/// current render and the target sketch.
RgbImage make_reference(const DeformEngine& engine, const DeformJob& job);

void write_loss_csv(std::span<const IterationRecord> history, const std::filesystem::path& path);
std::string loss_csv(std::span<const IterationRecord> history);

}  // namespace splatcage
