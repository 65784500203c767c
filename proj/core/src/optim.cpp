#include "splatcage/optim.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "splatcage/error.hpp"
#include "splatcage/loss.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/rotation6d.hpp"

namespace splatcage {

namespace {

using nlohmann::json;

void check_finite(const VecX& v, const char* stage, int iteration) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorCode::NaNDetected,
                  std::string("non-finite value at stage ") + stage + ", iteration " + std::to_string(iteration),
                  static_cast<std::size_t>(i));
    }
  }
}

template <class T>
void check_finite(std::span<const T> items, const char* stage, int iteration) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].allFinite()) {
      throw Error(ErrorCode::NaNDetected,
                  std::string("non-finite value at stage ") + stage + ", iteration " + std::to_string(iteration), i);
    }
  }
}

void check_finite(double v, const char* stage, int iteration) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NaNDetected,
                std::string("non-finite value at stage ") + stage + ", iteration " + std::to_string(iteration));
  }
}

double wrap_degrees(double d) {
  d = std::fmod(d, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Parameterization p) {
  switch (p) {
    case Parameterization::Decomposed: return "decomposed";
    case Parameterization::DirectJacobian: return "jacobian";
    case Parameterization::DirectVertices: return "vertices";
  }
  return "?";
}

Parameterization parse_parameterization(std::string_view text) {
  if (text == "decomposed") return Parameterization::Decomposed;
  if (text == "jacobian") return Parameterization::DirectJacobian;
  if (text == "vertices") return Parameterization::DirectVertices;
  throw Error(ErrorCode::InvalidArgument, "unknown parameterization '" + std::string(text) + "'");
}

void validate(const OptimConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
  if (c.iterations <= 0) fail("iterations must be positive");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate must be positive");
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) fail("alpha must be >= 0");
  if (c.num_random_views < 0) fail("num_random_views must be >= 0");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) fail("adam betas must be in [0, 1)");
  if (!(c.eps > 0.0)) fail("adam_eps must be positive");
  if (!(c.guidance_weight >= 0.0) || !std::isfinite(c.guidance_weight)) fail("guidance_weight must be >= 0");
  if (c.checkpoint_every < 0) fail("checkpoint_every must be >= 0");
}

std::string config_to_json(const OptimConfig& c) {
  json j;
  j["iterations"] = c.iterations;
  j["learning_rate"] = c.learning_rate;
  j["alpha"] = c.alpha;
  j["num_random_views"] = c.num_random_views;
  j["adam_betas"] = {c.beta1, c.beta2};
  j["adam_eps"] = c.eps;
  j["seed"] = c.seed;
  j["guidance_weight"] = c.guidance_weight;
  j["checkpoint_every"] = c.checkpoint_every;
  j["prompt"] = c.prompt;
  j["parameterization"] = std::string(to_string(c.parameterization));
  return j.dump(2);
}

OptimConfig config_from_json(std::string_view text, OptimConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "iterations") c.iterations = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "num_random_views") c.num_random_views = value.get<int>();
      else if (key == "adam_betas") {
        if (!value.is_array() || value.size() != 2) throw Error(ErrorCode::InvalidArgument, "adam_betas needs 2 values");
        c.beta1 = value[0].get<double>();
        c.beta2 = value[1].get<double>();
      } else if (key == "adam_eps") c.eps = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "guidance_weight") c.guidance_weight = value.get<double>();
      else if (key == "checkpoint_every") c.checkpoint_every = value.get<int>();
      else if (key == "prompt") c.prompt = value.get<std::string>();
      else if (key == "parameterization") c.parameterization = parse_parameterization(value.get<std::string>());
      else throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------

DeformEngine::DeformEngine(std::shared_ptr<const SplatCloud> cloud, CageMesh cage,
                           const std::filesystem::path& table_cache)
    : cloud_(std::move(cloud)),
      cage_(std::move(cage)),
      tables_(compute_tables_cached(cage_, centroids(*cloud_), table_cache)),
      system_(build_poisson(cage_)),
      rest_sigma_(covariances(*cloud_)) {}

VecX DeformEngine::pack(const JacobianParams& p) {
  const std::size_t nf = p.num_faces();
  VecX x(12 * nf + 3);
  for (std::size_t t = 0; t < nf; ++t) {
    x.segment<6>(6 * t) = p.rot6[t];
    x.segment<6>(6 * nf + 6 * t) = p.stretch6[t];
  }
  x.tail<3>() = p.translation;
  return x;
}

JacobianParams DeformEngine::unpack(const VecX& x, std::size_t nf) {
  if (static_cast<std::size_t>(x.size()) != 12 * nf + 3) {
    throw Error(ErrorCode::DimensionMismatch, "parameter vector does not match the cage");
  }
  JacobianParams p;
  p.rot6.resize(nf);
  p.stretch6.resize(nf);
  for (std::size_t t = 0; t < nf; ++t) {
    p.rot6[t] = x.segment<6>(6 * t);
    p.stretch6[t] = x.segment<6>(6 * nf + 6 * t);
  }
  p.translation = x.tail<3>();
  return p;
}

VecX DeformEngine::initial_vector(Parameterization p) const {
  const std::size_t nf = cage_.num_faces(), nv = cage_.num_vertices();
  switch (p) {
    case Parameterization::Decomposed:
      return pack(JacobianParams::identity(nf));
    case Parameterization::DirectJacobian: {
      VecX x = VecX::Zero(9 * nf + 3);
      for (std::size_t t = 0; t < nf; ++t) {
        x[9 * t] = x[9 * t + 4] = x[9 * t + 8] = 1.0;
      }
      return x;
    }
    case Parameterization::DirectVertices: {
      VecX x(3 * nv);
      for (std::size_t v = 0; v < nv; ++v) x.segment<3>(3 * v) = cage_.vertices[v];
      return x;
    }
  }
  return {};
}

DeformEngine::State DeformEngine::forward(Parameterization p, const VecX& x) const {
  const std::size_t nf = cage_.num_faces(), nv = cage_.num_vertices();
  State s;
  switch (p) {
    case Parameterization::Decomposed: {
      s.transforms = params_to_transforms(unpack(x, nf));
      s.cage = solve_cage(system_, s.transforms, x.tail<3>());
      break;
    }
    case Parameterization::DirectJacobian: {
      if (static_cast<std::size_t>(x.size()) != 9 * nf + 3) {
        throw Error(ErrorCode::DimensionMismatch, "parameter vector does not match the cage");
      }
      s.transforms.resize(nf);
      for (std::size_t t = 0; t < nf; ++t) {
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) s.transforms[t](r, c) = x[9 * t + 3 * r + c];
        }
      }
      s.cage = solve_cage(system_, s.transforms, x.tail<3>());
      break;
    }
    case Parameterization::DirectVertices: {
      if (static_cast<std::size_t>(x.size()) != 3 * nv) {
        throw Error(ErrorCode::DimensionMismatch, "parameter vector does not match the cage");
      }
      std::vector<Vec3> verts(nv);
      for (std::size_t v = 0; v < nv; ++v) verts[v] = x.segment<3>(3 * v);
      s.cage = deformed_from_vertices(cage_, std::move(verts));
      break;
    }
  }
  s.splats = transport(rest_sigma_, tables_, s.cage);
  s.splats.source = cloud_.get();
  return s;
}

VecX DeformEngine::backward(Parameterization p, const VecX& x, const State& state, std::span<const Vec3> grad_mu,
                            std::span<const Mat3> grad_sigma) const {
  const CageCotangent cot = transport_adjoint(tables_, rest_sigma_, state.splats, grad_mu, grad_sigma);
  const std::size_t nf = cage_.num_faces(), nv = cage_.num_vertices();
  VecX g;
  switch (p) {
    case Parameterization::Decomposed: {
      const CageGradient cg = solve_cage_adjoint(system_, cot.vertices, cot.face_vectors);
      JacobianParams gp = params_to_transforms_adjoint(unpack(x, nf), cg.transforms);
      gp.translation = cg.translation;
      g = pack(gp);
      break;
    }
    case Parameterization::DirectJacobian: {
      const CageGradient cg = solve_cage_adjoint(system_, cot.vertices, cot.face_vectors);
      g.resize(9 * nf + 3);
      for (std::size_t t = 0; t < nf; ++t) {
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) g[9 * t + 3 * r + c] = cg.transforms[t](r, c);
        }
      }
      g.tail<3>() = cg.translation;
      break;
    }
    case Parameterization::DirectVertices: {
      const std::vector<Vec3> gv = vertex_gradient(cage_, state.cage.vertices, cot);
      g.resize(3 * nv);
      for (std::size_t v = 0; v < nv; ++v) g.segment<3>(3 * v) = gv[v];
      break;
    }
  }
  return g;
}

JacobianParams DeformEngine::to_params(Parameterization p, const VecX& x, const State& state) const {
  switch (p) {
    case Parameterization::Decomposed:
      return unpack(x, cage_.num_faces());
    case Parameterization::DirectJacobian:
      return params_from_transforms(state.transforms, x.tail<3>());
    case Parameterization::DirectVertices: {
      // The achieved Jacobians of an actual cage are integrable, so re-solving
      // them reproduces the cage exactly.
      Vec3 mean = Vec3::Zero();
      for (const auto& v : state.cage.vertices) mean += v;
      mean /= static_cast<double>(state.cage.vertices.size());
      const Vec3 shift = mean - cage_.vertex_mean();
      return params_from_transforms(system_.jacobians(state.cage), shift);
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

std::uint64_t iteration_seed(std::uint64_t seed, int iteration) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(iteration));
}

std::vector<CameraView> sample_views(const CameraView& sketch_view, int n, std::uint64_t seed) {
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "number of views must be >= 0");
  std::vector<CameraView> views;
  views.reserve(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> azim(0.0, 360.0), elev(-10.0, 45.0);
  for (int i = 0; i < n; ++i) {
    CameraView v = sketch_view;
    v.azimuth = azim(rng);
    v.elevation = elev(rng);
    views.push_back(v);
  }
  return views;
}

RgbImage make_reference(const DeformEngine& engine, const DeformJob& job) {
  if (!job.guidance) return {};
  ReferenceRequest req;
  req.render = render_color(engine.cloud(), job.sketch_view);
  req.sketch = job.target;
  req.prompt = job.config.prompt;
  return job.guidance->sketch_to_reference(req);
}

GradientEval total_gradient(const DeformEngine& engine, const DeformJob& job, const VecX& x, int iteration,
                            const RgbImage& reference) {
  const OptimConfig& cfg = job.config;
  GradientEval ev;
  ev.state = engine.forward(cfg.parameterization, x);
  const DeformedSplats& splats = ev.state.splats;
  check_finite<Vec3>(ev.state.cage.vertices, "cage", iteration);
  check_finite<Vec3>(splats.mu, "transport", iteration);
  check_finite<Mat3>(splats.sigma, "transport", iteration);

  const bool use_guidance = job.guidance && cfg.guidance_weight > 0.0 && cfg.num_random_views > 0;
  std::vector<CameraView> views{job.sketch_view};
  if (use_guidance) {
    const auto extra = sample_views(job.sketch_view, cfg.num_random_views, iteration_seed(cfg.seed, iteration));
    views.insert(views.end(), extra.begin(), extra.end());
  }

  const int nviews = static_cast<int>(views.size());
  std::vector<SplatGradients> grads(views.size());
  std::vector<double> guidance_terms(views.size(), 0.0);
  std::vector<char> has_grad(views.size(), 0);
  SilhouetteMask rendered;
  std::vector<std::exception_ptr> errors(views.size());

#pragma omp parallel for schedule(dynamic, 1) if (nviews > 1)
  for (int k = 0; k < nviews; ++k) {
    try {
      const RasterPass pass(splats, views[k]);
      SilhouetteMask alpha = pass.silhouette();
      if (k == 0) {
        if (!alpha.same_size(job.target)) {
          throw Error(ErrorCode::DimensionMismatch, "target mask size differs from the sketch view");
        }
        if (cfg.alpha != 0.0) {
          const SilhouetteMask g = silhouette_loss_grad(alpha, job.target, cfg.alpha);
          grads[k] = pass.backward(&g);
          has_grad[k] = 1;
        }
        rendered = std::move(alpha);
      } else {
        GuidanceRequest req;
        req.rendered = to_rgb(alpha);
        req.reference = reference;
        req.delta_elev = views[k].elevation - job.sketch_view.elevation;
        req.delta_azim = wrap_degrees(views[k].azimuth - job.sketch_view.azimuth);
        req.prompt = cfg.prompt;
        req.timestep_seed = iteration_seed(cfg.seed ^ 0x5DEECE66Dull, iteration * 64 + k);
        const GuidanceResponse resp = job.guidance->sds_gradient(req);
        if (!resp.grad.same_size(req.rendered)) {
          throw Error(ErrorCode::BadResponse, "guidance gradient size differs from the request");
        }
        const double w = resp.scale * cfg.guidance_weight;
        // The silhouette is replicated into three channels, so its gradient
        // is the channel sum.
        SilhouetteMask g(alpha.width, alpha.height);
        double term = 0.0;
        for (std::size_t i = 0; i < g.pixels(); ++i) {
          const double s = resp.grad.data[3 * i] + resp.grad.data[3 * i + 1] + resp.grad.data[3 * i + 2];
          g.data[i] = w * s;
          term += w * s * alpha.data[i];
        }
        guidance_terms[k] = term;
        grads[k] = pass.backward(&g);
        has_grad[k] = 1;
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ev.l_sil = silhouette_loss(rendered, job.target);
  check_finite(ev.l_sil, "render", iteration);
  for (double t : guidance_terms) ev.l_guidance += t;
  ev.l_total = cfg.alpha * ev.l_sil + ev.l_guidance;
  ev.rendered = std::move(rendered);

  const std::size_t n = splats.count();
  std::vector<Vec3> gmu(n, Vec3::Zero());
  std::vector<Mat3> gsig(n, Mat3::Zero());
  bool any = false;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!has_grad[k]) continue;
    any = true;
    for (std::size_t i = 0; i < n; ++i) {
      gmu[i] += grads[k].mu[i];
      gsig[i] += grads[k].sigma[i];
    }
  }
  check_finite<Vec3>(gmu, "raster backward", iteration);
  check_finite<Mat3>(gsig, "raster backward", iteration);
  if (any) {
    ev.grad = engine.backward(cfg.parameterization, x, ev.state, gmu, gsig);
  } else {
    ev.grad = VecX::Zero(x.size());
  }
  check_finite(ev.grad, "parameter gradient", iteration);
  return ev;
}

std::string loss_csv(std::span<const IterationRecord> history) {
  std::string out = "iteration,L_sil,L_guidance,L_total\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", r.iteration, r.l_sil, r.l_guidance, r.l_total);
    out += line;
  }
  return out;
}

void write_loss_csv(std::span<const IterationRecord> history, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << loss_csv(history);
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

DeformResult run(const DeformEngine& engine, const DeformJob& job) {
  const OptimConfig& cfg = job.config;
  validate(cfg);
  validate(job.sketch_view);
  if (!job.target.same_size(job.sketch_view.width, job.sketch_view.height)) {
    throw Error(ErrorCode::DimensionMismatch, "target mask size differs from the sketch view");
  }
  const bool use_guidance = job.guidance && cfg.guidance_weight > 0.0 && cfg.num_random_views > 0;
  RgbImage reference = job.reference;
  if (use_guidance && reference.data.empty()) reference = make_reference(engine, job);
  if (!job.output_dir.empty()) std::filesystem::create_directories(job.output_dir);

  DeformResult result;
  VecX x = engine.initial_vector(cfg.parameterization);
  VecX m = VecX::Zero(x.size()), v = VecX::Zero(x.size());
  double b1t = 1.0, b2t = 1.0;
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 0; it < cfg.iterations; ++it) {
    if (job.cancel && job.cancel->load()) throw Error(ErrorCode::Cancelled, "job cancelled");
    GradientEval ev = total_gradient(engine, job, x, it, reference);

    IterationRecord rec;
    rec.iteration = it;
    rec.l_sil = ev.l_sil;
    rec.l_guidance = ev.l_guidance;
    rec.l_total = ev.l_total;
    rec.flipped_faces = count_flipped_faces(engine.cage(), ev.state.cage.vertices);
    rec.inverted_splats = ev.state.splats.inverted_count();
    if (it == 0) result.initial_l_sil = ev.l_sil;
    result.max_flipped_faces = std::max(result.max_flipped_faces, rec.flipped_faces);
    result.history.push_back(rec);

    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * ev.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * ev.grad.cwiseProduct(ev.grad);
    const double c1 = 1.0 / (1.0 - b1t), c2 = 1.0 / (1.0 - b2t);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x[i] -= cfg.learning_rate * (m[i] * c1) / (std::sqrt(v[i] * c2) + cfg.eps);
    }
    check_finite(x, "adam update", it);

    if (!job.output_dir.empty() && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      const auto state = engine.forward(cfg.parameterization, x);
      save_params(engine.to_params(cfg.parameterization, x, state), job.output_dir / "checkpoint.params");
      write_loss_csv(result.history, job.output_dir / "loss.csv");
    }
    if (job.on_iteration) job.on_iteration(rec);
  }

  result.state = engine.forward(cfg.parameterization, x);
  result.params = engine.to_params(cfg.parameterization, x, result.state);
  result.final_mask = render_silhouette(result.state.splats, job.sketch_view);
  result.final_l_sil = silhouette_loss(result.final_mask, job.target);
  result.max_flipped_faces =
      std::max(result.max_flipped_faces, count_flipped_faces(engine.cage(), result.state.cage.vertices));
  result.x = std::move(x);
  if (!job.output_dir.empty()) write_loss_csv(result.history, job.output_dir / "loss.csv");
  return result;
}

}  // namespace splatcage
