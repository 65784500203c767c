#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "splatcage/anim.hpp"
#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"
#include "splatcage/optim.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/service.hpp"
#include "splatcage/synthetic.hpp"

namespace splatcage {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string quote(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ViewFlags {
  double elev = 0.0, azim = 0.0, radius = 4.0, fov = 45.0;
  void add(CLI::App* app) {
    app->add_option("--elev", elev, "Camera elevation in degrees");
    app->add_option("--azim", azim, "Camera azimuth in degrees");
    app->add_option("--radius", radius, "Orbit radius");
    app->add_option("--fov", fov, "Vertical field of view in degrees");
  }
  CameraView view(int w, int h) const {
    CameraView v;
    v.elevation = elev;
    v.azimuth = azim;
    v.radius = radius;
    v.fov_y = fov;
    v.width = w;
    v.height = h;
    validate(v);
    return v;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sketch-guided cage deformation of Gaussian-splat scenes"};
  app.require_subcommand(1);
  std::function<void()> action;

  // convert ------------------------------------------------------------------
  fs::path conv_mesh, conv_out;
  int conv_samples = 5000;
  std::uint64_t conv_seed = 0;
  auto* conv = app.add_subcommand("convert", "Fit isotropic splats to mesh surface samples");
  conv->add_option("--mesh", conv_mesh, "Input OBJ mesh")->required();
  conv->add_option("--samples", conv_samples, "Number of splats");
  conv->add_option("--seed", conv_seed, "Sampling seed");
  conv->add_option("--out", conv_out, "Output PLY")->required();
  conv->callback([&] {
    action = [&] {
      const SplatCloud cloud = sample_mesh_surface(load_obj(conv_mesh), conv_samples, conv_seed);
      save_ply(cloud, conv_out);
      out << "wrote " << cloud.count() << " splats to " << conv_out.string() << "\n";
    };
  });

  // cage ---------------------------------------------------------------------
  fs::path cage_in, cage_out;
  CageOptions cage_opts;
  auto* cage = app.add_subcommand("cage", "Build an enclosing cage from a splat scene");
  cage->add_option("--in", cage_in, "Scene PLY")->required();
  cage->add_option("--res", cage_opts.resolution, "Grid resolution along the longest axis");
  cage->add_option("--offset-cells", cage_opts.offset_cells, "Offset distance in grid cells");
  cage->add_option("--verts", cage_opts.target_vertices, "Target cage vertex count");
  cage->add_option("--padding", cage_opts.padding, "Bounding box padding (fraction of extent)");
  cage->add_option("--out", cage_out, "Output OBJ")->required();
  cage->callback([&] {
    action = [&] {
      const SplatCloud cloud = load_ply(cage_in);
      const CageMesh c = build_cage(centroids(cloud), cage_opts);
      save_obj(c, cage_out);
      out << "cage vertices=" << c.num_vertices() << " faces=" << c.num_faces() << "\n";
    };
  });

  // deform -------------------------------------------------------------------
  fs::path def_scene, def_cage, def_sketch, def_out, def_config, def_cache;
  ViewFlags def_view;
  OptimConfig def_cfg;
  std::string def_guidance = "mock", def_param = "decomposed";
  auto* deform = app.add_subcommand("deform", "Optimize a cage deformation against a silhouette sketch");
  deform->add_option("--scene", def_scene, "Scene PLY")->required();
  deform->add_option("--cage", def_cage, "Cage OBJ")->required();
  deform->add_option("--sketch", def_sketch, "Sketch mask PNG (gray; white inside)")->required();
  def_view.add(deform);
  auto* o_iters = deform->add_option("--iters", def_cfg.iterations, "Iterations");
  auto* o_lr = deform->add_option("--lr", def_cfg.learning_rate, "Adam learning rate");
  auto* o_alpha = deform->add_option("--alpha", def_cfg.alpha, "Silhouette loss weight");
  auto* o_views = deform->add_option("--views", def_cfg.num_random_views, "Random guidance views per iteration");
  auto* o_seed = deform->add_option("--seed", def_cfg.seed, "Seed for view sampling");
  auto* o_gw = deform->add_option("--guidance-weight", def_cfg.guidance_weight, "Weight of guidance gradients");
  auto* o_prompt = deform->add_option("--prompt", def_cfg.prompt, "Text prompt forwarded to guidance");
  auto* o_param = deform->add_option("--param", def_param, "decomposed | jacobian | vertices");
  deform->add_option("--guidance", def_guidance, "mock | none | http://host:port");
  deform->add_option("--config", def_config, "JSON config file (flags override it)");
  deform->add_option("--cache", def_cache, "Directory for cached coordinate tables");
  deform->add_option("--out", def_out, "Output directory")->required();
  deform->callback([&] {
    action = [&] {
      OptimConfig cfg;
      if (!def_config.empty()) cfg = config_from_json(read_text(def_config), cfg);
      if (o_iters->count()) cfg.iterations = def_cfg.iterations;
      if (o_lr->count()) cfg.learning_rate = def_cfg.learning_rate;
      if (o_alpha->count()) cfg.alpha = def_cfg.alpha;
      if (o_views->count()) cfg.num_random_views = def_cfg.num_random_views;
      if (o_seed->count()) cfg.seed = def_cfg.seed;
      if (o_gw->count()) cfg.guidance_weight = def_cfg.guidance_weight;
      if (o_prompt->count()) cfg.prompt = def_cfg.prompt;
      if (o_param->count()) cfg.parameterization = parse_parameterization(def_param);
      validate(cfg);
      out << "config iterations=" << cfg.iterations << " learning_rate=" << cfg.learning_rate
          << " alpha=" << cfg.alpha << " num_random_views=" << cfg.num_random_views << " seed=" << cfg.seed
          << " guidance_weight=" << cfg.guidance_weight << " parameterization=" << to_string(cfg.parameterization)
          << " guidance=" << def_guidance << "\n";

      const SilhouetteMask sketch = read_png_gray(def_sketch);
      DeformJob job;
      job.sketch_view = def_view.view(sketch.width, sketch.height);
      job.target = sketch_to_target(sketch);
      job.config = cfg;
      std::unique_ptr<GuidanceClient> guidance;
      if (def_guidance != "none") guidance = make_guidance(def_guidance);
      job.guidance = guidance.get();
      job.output_dir = def_out;
      job.on_iteration = [&](const IterationRecord& r) {
        if ((r.iteration + 1) % 100 == 0) {
          out << "iter=" << r.iteration + 1 << " l_sil=" << fmt(r.l_sil) << " l_total=" << fmt(r.l_total) << "\n";
        }
      };

      auto cloud = std::make_shared<const SplatCloud>(load_ply(def_scene));
      const DeformEngine engine(cloud, load_obj(def_cage), def_cache);
      fs::create_directories(def_out);
      write_png(job.target, def_out / "target.png");
      write_text(def_out / "config.json", config_to_json(cfg) + "\n");
      const DeformResult res = run(engine, job);

      save_ply(export_deformed(res.state.splats).cloud, def_out / "result.ply");
      save_params(res.params, def_out / "params.bin");
      save_obj(res.state.cage.vertices, engine.cage().faces, def_out / "deformed_cage.obj");
      write_png(res.final_mask, def_out / "final_mask.png");
      write_png(render_color(res.state.splats, job.sketch_view), def_out / "final_color.png");
      const double iou = mask_iou(res.final_mask, job.target);
      json meta = {{"scene", fs::absolute(def_scene).string()},
                   {"cage", fs::absolute(def_cage).string()},
                   {"view",
                    {{"elevation", job.sketch_view.elevation},
                     {"azimuth", job.sketch_view.azimuth},
                     {"radius", job.sketch_view.radius},
                     {"fov_y", job.sketch_view.fov_y},
                     {"width", job.sketch_view.width},
                     {"height", job.sketch_view.height}}},
                   {"initial_l_sil", res.initial_l_sil},
                   {"final_l_sil", res.final_l_sil},
                   {"final_iou", iou},
                   {"max_flipped_faces", res.max_flipped_faces}};
      write_text(def_out / "job.json", meta.dump(2) + "\n");
      out << "initial_l_sil=" << fmt(res.initial_l_sil) << " final_l_sil=" << fmt(res.final_l_sil)
          << " iou=" << fmt(iou) << " max_flipped_faces=" << res.max_flipped_faces << "\n";
    };
  });

  // animate ------------------------------------------------------------------
  std::string anim_jobs, anim_times, anim_interp = "jacobian";
  double anim_fps = 30.0, anim_duration = 2.0;
  bool anim_ply = false;
  fs::path anim_out;
  auto* animate = app.add_subcommand("animate", "Interpolate deform results into a frame sequence");
  animate->add_option("--jobs", anim_jobs, "Comma-separated deform output directories")->required();
  animate->add_option("--times", anim_times, "Comma-separated keyframe times in [0, 1]");
  animate->add_option("--fps", anim_fps, "Frames per second");
  animate->add_option("--duration", anim_duration, "Duration in seconds");
  animate->add_option("--interp", anim_interp, "jacobian | linear");
  animate->add_flag("--ply", anim_ply, "Also write per-frame PLY files");
  animate->add_option("--out", anim_out, "Output directory")->required();
  animate->callback([&] {
    action = [&] {
      const auto dirs = split_list(anim_jobs);
      if (dirs.size() < 2) throw Error(ErrorCode::InsufficientKeyframes, "at least two jobs are required");
      std::vector<json> metas;
      for (const auto& d : dirs) metas.push_back(json::parse(read_text(fs::path(d) / "job.json")));
      for (const auto& m : metas) {
        if (m.at("scene") != metas.front().at("scene") || m.at("cage") != metas.front().at("cage")) {
          throw Error(ErrorCode::MismatchedCages, "jobs were run on different scenes or cages");
        }
      }
      std::vector<double> times;
      for (const auto& t : split_list(anim_times)) times.push_back(std::stod(t));
      if (times.empty()) {
        for (std::size_t i = 0; i < dirs.size(); ++i) times.push_back(static_cast<double>(i) / (dirs.size() - 1));
      }
      if (times.size() != dirs.size()) throw Error(ErrorCode::InvalidArgument, "one time per job required");

      auto cloud = std::make_shared<const SplatCloud>(load_ply(metas.front().at("scene").get<std::string>()));
      const DeformEngine engine(cloud, load_obj(metas.front().at("cage").get<std::string>()));
      std::vector<Keyframe> keys;
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        keys.push_back(Keyframe::from_params(times[i], load_params(fs::path(dirs[i]) / "params.bin"),
                                             engine.system(), fs::path(dirs[i]).filename().string()));
      }
      SequenceOptions opts;
      opts.fps = anim_fps;
      opts.duration = anim_duration;
      opts.write_ply = anim_ply;
      opts.mode = parse_interpolation(anim_interp);
      const json& v = metas.front().at("view");
      opts.view.elevation = v.at("elevation");
      opts.view.azimuth = v.at("azimuth");
      opts.view.radius = v.at("radius");
      opts.view.fov_y = v.at("fov_y");
      opts.view.width = v.at("width");
      opts.view.height = v.at("height");
      const SequenceResult seq = render_sequence(keys, engine, opts, anim_out);
      out << "frames=" << seq.frames.size() << " manifest=" << seq.manifest.string() << "\n";
    };
  });

  // render -------------------------------------------------------------------
  fs::path ren_scene, ren_out;
  ViewFlags ren_view;
  int ren_w = 512, ren_h = 512;
  std::string ren_mode = "color";
  auto* render = app.add_subcommand("render", "Render a scene to PNG");
  render->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  render->add_option("--scene", ren_scene, "Scene PLY")->required();
  ren_view.add(render);
  render->add_option("--w", ren_w, "Width in pixels");
  render->add_option("--h", ren_h, "Height in pixels");
  render->add_option("--mode", ren_mode, "color | silhouette");
  render->add_option("--out", ren_out, "Output PNG")->required();
  render->callback([&] {
    action = [&] {
      if (ren_mode != "color" && ren_mode != "silhouette") {
        throw Error(ErrorCode::InvalidArgument, "mode must be color or silhouette");
      }
      const SplatCloud cloud = load_ply(ren_scene);
      const CameraView view = ren_view.view(ren_w, ren_h);
      if (ren_mode == "color") {
        write_png(render_color(cloud, view), ren_out);
      } else {
        write_png(render_silhouette(cloud, view), ren_out);
      }
      out << "wrote " << ren_out.string() << "\n";
    };
  });

  // ablate -------------------------------------------------------------------
  std::string abl_bench = "bending", abl_params = "decomposed,jacobian,vertices";
  int abl_seeds = 3;
  OptimConfig abl_cfg;
  BenchmarkOptions abl_opts;
  fs::path abl_out;
  auto* ablate = app.add_subcommand("ablate", "Compare cage parameterizations on a synthetic benchmark");
  ablate->add_option("--benchmark", abl_bench, "bending | translation");
  ablate->add_option("--param", abl_params, "Comma-separated parameterizations");
  ablate->add_option("--seeds", abl_seeds, "Number of seeds");
  ablate->add_option("--iters", abl_cfg.iterations, "Iterations per run");
  ablate->add_option("--lr", abl_cfg.learning_rate, "Adam learning rate");
  ablate->add_option("--alpha", abl_cfg.alpha, "Silhouette loss weight");
  ablate->add_option("--views", abl_cfg.num_random_views, "Random guidance views per iteration");
  ablate->add_option("--splats", abl_opts.splats, "Splats in the benchmark scene");
  ablate->add_option("--size", abl_opts.image_size, "Image size in pixels");
  ablate->add_option("--cage-verts", abl_opts.cage_vertices, "Target cage vertex count");
  ablate->add_option("--out", abl_out, "Output CSV")->required();
  ablate->callback([&] {
    action = [&] {
      if (abl_seeds <= 0) throw Error(ErrorCode::InvalidArgument, "seeds must be positive");
      std::vector<Parameterization> params;
      for (const auto& p : split_list(abl_params)) params.push_back(parse_parameterization(p));
      const Benchmark bench = make_benchmark(abl_bench, abl_opts);
      const DeformEngine engine(bench.cloud, bench.cage);
      const MockGuidance mock;
      std::string csv = "benchmark,parameterization,seed,final_l_sil,initial_l_sil,iou,max_flipped_faces\n";
      for (Parameterization p : params) {
        for (int s = 0; s < abl_seeds; ++s) {
          DeformJob job;
          job.sketch_view = bench.view;
          job.target = bench.target;
          job.config = abl_cfg;
          job.config.parameterization = p;
          job.config.seed = static_cast<std::uint64_t>(s);
          job.guidance = &mock;
          const DeformResult res = run(engine, job);
          const double iou = mask_iou(res.final_mask, bench.target);
          const std::string row = bench.name + "," + std::string(to_string(p)) + "," + std::to_string(s) + "," +
                                  fmt(res.final_l_sil) + "," + fmt(res.initial_l_sil) + "," + fmt(iou) + "," +
                                  std::to_string(res.max_flipped_faces);
          csv += row + "\n";
          out << row << "\n";
        }
      }
      write_text(abl_out, csv);
    };
  });

  // serve --------------------------------------------------------------------
  fs::path srv_config;
  ServiceConfig srv;
  auto* serve = app.add_subcommand("serve", "Run the local HTTP service");
  serve->add_option("--config", srv_config, "JSON service config");
  auto* o_host = serve->add_option("--host", srv.host, "Bind address");
  auto* o_port = serve->add_option("--port", srv.port, "Port (0 picks one)");
  auto* o_ws = serve->add_option("--workspace", srv.workspace, "Workspace directory");
  auto* o_guid = serve->add_option("--guidance", srv.guidance, "mock | none | http://host:port");
  serve->callback([&] {
    action = [&] {
      ServiceConfig c;
      if (!srv_config.empty()) c = load_service_config(srv_config, c);
      c = apply_env(c);
      if (o_host->count()) c.host = srv.host;
      if (o_port->count()) c.port = srv.port;
      if (o_ws->count()) c.workspace = srv.workspace;
      if (o_guid->count()) c.guidance = srv.guidance;
      Service service(c);
      const int port = service.bind();
      out << "listening on http://" << c.host << ":" << port << std::endl;
      service.serve();
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error=Usage message=\"" << quote(e.what()) << "\"\n";
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error=" << to_string(e.code()) << " message=\"" << quote(e.what()) << "\"\n";
  } catch (const std::exception& e) {
    err << "error=Internal message=\"" << quote(e.what()) << "\"\n";
  }
  return 2;
}

}  // namespace splatcage
