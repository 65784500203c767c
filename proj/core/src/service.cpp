// Eigen before httplib: <resolv.h> defines a `_res` macro that clashes with Eigen internals.
#include "splatcage/anim.hpp"
#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"
#include "splatcage/guidance.hpp"
#include "splatcage/hash.hpp"
#include "splatcage/optim.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace splatcage {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

ServiceConfig load_service_config(const fs::path& path, ServiceConfig c) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(f);
    for (const auto& [key, value] : j.items()) {
      if (key == "host") c.host = value.get<std::string>();
      else if (key == "port") c.port = value.get<int>();
      else if (key == "workspace") c.workspace = value.get<std::string>();
      else if (key == "guidance") c.guidance = value.get<std::string>();
      else if (key == "cors") c.cors = value.get<bool>();
      else throw Error(ErrorCode::InvalidArgument, "unknown service config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad service config: ") + e.what());
  }
  return c;
}

ServiceConfig apply_env(ServiceConfig c) {
  if (const char* v = std::getenv("SPLATCAGE_HOST")) c.host = v;
  if (const char* v = std::getenv("SPLATCAGE_PORT")) c.port = std::atoi(v);
  if (const char* v = std::getenv("SPLATCAGE_WORKSPACE")) c.workspace = v;
  if (const char* v = std::getenv("SPLATCAGE_GUIDANCE")) c.guidance = v;
  return c;
}

// ---------------------------------------------------------------------------
// Tar

namespace {

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

}  // namespace

std::vector<std::uint8_t> make_tar(std::span<const TarEntry> entries) {
  std::vector<std::uint8_t> out;
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() > 99) throw Error(ErrorCode::InvalidArgument, "tar entry name too long");
    char h[512] = {};
    std::memcpy(h, e.name.data(), e.name.size());
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, e.data.size());
    put_octal(h + 136, 12, 0);
    std::memset(h + 148, ' ', 8);
    h[156] = '0';
    std::memcpy(h + 257, "ustar", 6);
    std::memcpy(h + 263, "00", 2);
    unsigned sum = 0;
    for (unsigned char c : h) sum += c;
    std::snprintf(h + 148, 8, "%06o", sum);
    h[155] = ' ';
    out.insert(out.end(), h, h + 512);
    out.insert(out.end(), e.data.begin(), e.data.end());
    out.resize(out.size() + (512 - e.data.size() % 512) % 512, 0);
  }
  out.resize(out.size() + 1024, 0);
  return out;
}

std::vector<TarEntry> read_tar(std::span<const std::uint8_t> bytes) {
  std::vector<TarEntry> out;
  std::size_t pos = 0;
  while (pos + 512 <= bytes.size()) {
    const char* h = reinterpret_cast<const char*>(bytes.data() + pos);
    if (h[0] == '\0') break;
    TarEntry e;
    e.name.assign(h, strnlen(h, 100));
    const std::uint64_t size = std::strtoull(std::string(h + 124, 12).c_str(), nullptr, 8);
    pos += 512;
    if (pos + size > bytes.size()) throw Error(ErrorCode::InvalidArgument, "truncated tar archive");
    e.data.assign(bytes.begin() + pos, bytes.begin() + pos + size);
    pos += (size + 511) / 512 * 512;
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Service

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void not_found(const std::string& what) { throw HttpError{404, "NotFound", what + " not found"}; }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::MissingField:
    case ErrorCode::MalformedHeader:
    case ErrorCode::NormalizationFailure:
    case ErrorCode::EmptyCloud:
    case ErrorCode::DegenerateInput:
    case ErrorCode::EmptyLevelSet:
    case ErrorCode::NonManifoldOutput:
    case ErrorCode::PointOutsideCage:
    case ErrorCode::NearBoundary:
    case ErrorCode::MismatchedCages:
    case ErrorCode::InsufficientKeyframes:
    case ErrorCode::DimensionMismatch:
      return 422;
    case ErrorCode::ServiceUnavailable:
      return 503;
    default:
      return 400;
  }
}

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, std::string_view data) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  }
  fs::rename(tmp, p);
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') return false;
  }
  return true;
}

json parse_body(const httplib::Request& req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "InvalidArgument", "request body must be a JSON object"};
    return j;
  } catch (const json::exception& e) {
    throw HttpError{400, "InvalidArgument", std::string("invalid JSON: ") + e.what()};
  }
}

CameraView view_from_json(const json& j, CameraView v = {}) {
  v.elevation = j.value("elevation", j.value("elev", v.elevation));
  v.azimuth = j.value("azimuth", j.value("azim", v.azimuth));
  v.radius = j.value("radius", v.radius);
  v.fov_y = j.value("fov_y", v.fov_y);
  v.width = j.value("width", j.value("w", v.width));
  v.height = j.value("height", j.value("h", v.height));
  validate(v);
  return v;
}

json view_to_json(const CameraView& v) {
  return {{"elevation", v.elevation}, {"azimuth", v.azimuth}, {"radius", v.radius},
          {"fov_y", v.fov_y},         {"width", v.width},     {"height", v.height}};
}

enum class JobStatus { Queued, Running, Done, Failed, Cancelled };

const char* status_name(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
    case JobStatus::Cancelled: return "cancelled";
  }
  return "?";
}

JobStatus parse_status(const std::string& s) {
  if (s == "queued") return JobStatus::Queued;
  if (s == "running") return JobStatus::Running;
  if (s == "done") return JobStatus::Done;
  if (s == "cancelled") return JobStatus::Cancelled;
  return JobStatus::Failed;
}

struct Job {
  std::string id, scene, cage;
  CameraView view;
  OptimConfig config;
  JobStatus status = JobStatus::Queued;
  int iteration = 0;
  std::string error, reason;
  std::vector<double> loss_sil, loss_total;
  double initial_l_sil = 0.0, final_l_sil = 0.0, final_iou = 0.0;
  json artifacts = json::object();
  std::atomic<bool> cancel{false};
};

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  int port = -1;
  std::unique_ptr<GuidanceClient> guidance;

  std::mutex mutex;  // guards jobs, idempotency, engines and the pending queue
  std::condition_variable cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::shared_ptr<Job> pending;
  bool busy = false;
  bool stopping = false;
  std::map<std::string, std::tuple<int, std::string, std::string>> idempotent;
  std::map<std::string, std::shared_ptr<DeformEngine>> engines;
  std::uint64_t job_counter = 0;
  std::thread worker;

  fs::path dir(const std::string& sub) const { return config.workspace / sub; }

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    for (const char* sub : {"scenes", "cages", "jobs", "animations", "tables"}) fs::create_directories(dir(sub));
    if (config.guidance != "none") guidance = make_guidance(config.guidance);
    recover_jobs();
    routes();
    worker = std::thread([this] { work(); });
  }

  ~Impl() {
    {
      std::lock_guard lock(mutex);
      stopping = true;
      for (auto& [id, job] : jobs) job->cancel = true;
    }
    cv.notify_all();
    server.stop();
    if (worker.joinable()) worker.join();
  }

  // -- persistence -----------------------------------------------------------

  json job_json(const Job& j) const {
    json out;
    out["id"] = j.id;
    out["status"] = status_name(j.status);
    out["scene"] = j.scene;
    out["cage"] = j.cage;
    out["view"] = view_to_json(j.view);
    out["config"] = json::parse(config_to_json(j.config));
    out["iteration"] = j.iteration;
    out["total"] = j.config.iterations;
    out["progress"] = j.config.iterations > 0 ? static_cast<double>(j.iteration) / j.config.iterations : 0.0;
    out["loss"] = {{"l_sil", j.loss_sil}, {"l_total", j.loss_total}};
    out["initial_l_sil"] = j.initial_l_sil;
    out["final_l_sil"] = j.final_l_sil;
    out["final_iou"] = j.final_iou;
    out["artifacts"] = j.artifacts;
    if (!j.error.empty()) out["error"] = j.error;
    if (!j.reason.empty()) out["reason"] = j.reason;
    return out;
  }

  // Caller holds `mutex`.
  void persist(const Job& j) {
    const fs::path d = dir("jobs") / j.id;
    fs::create_directories(d);
    write_file(d / "job.json", job_json(j).dump(2));
  }

  void recover_jobs() {
    for (const auto& entry : fs::directory_iterator(dir("jobs"))) {
      const fs::path p = entry.path() / "job.json";
      if (!fs::exists(p)) continue;
      try {
        std::ifstream f(p);
        const json j = json::parse(f);
        auto job = std::make_shared<Job>();
        job->id = j.at("id").get<std::string>();
        job->scene = j.value("scene", "");
        job->cage = j.value("cage", "");
        job->view = view_from_json(j.at("view"));
        job->config = config_from_json(j.at("config").dump());
        job->status = parse_status(j.value("status", "failed"));
        job->iteration = j.value("iteration", 0);
        job->loss_sil = j.at("loss").value("l_sil", std::vector<double>{});
        job->loss_total = j.at("loss").value("l_total", std::vector<double>{});
        job->initial_l_sil = j.value("initial_l_sil", 0.0);
        job->final_l_sil = j.value("final_l_sil", 0.0);
        job->final_iou = j.value("final_iou", 0.0);
        job->artifacts = j.value("artifacts", json::object());
        job->error = j.value("error", "");
        job->reason = j.value("reason", "");
        if (job->status == JobStatus::Queued || job->status == JobStatus::Running) {
          job->status = JobStatus::Failed;
          job->reason = "restart";
          job->error = "service restarted while the job was active";
          persist(*job);
        }
        jobs[job->id] = job;
        ++job_counter;
      } catch (const std::exception&) {
        // Unreadable records are skipped; their directories stay on disk.
      }
    }
  }

  // -- workers ---------------------------------------------------------------

  std::shared_ptr<const SplatCloud> load_scene(const std::string& id) {
    if (!valid_id(id)) not_found("scene");
    const fs::path p = dir("scenes") / id / "scene.ply";
    if (!fs::exists(p)) not_found("scene " + id);
    return std::make_shared<const SplatCloud>(load_ply(p));
  }

  json load_cage_meta(const std::string& id) {
    if (!valid_id(id)) not_found("cage");
    const fs::path p = dir("cages") / (id + ".json");
    if (!fs::exists(p)) not_found("cage " + id);
    std::ifstream f(p);
    return json::parse(f);
  }

  std::shared_ptr<DeformEngine> engine_for(const std::string& scene, const std::string& cage) {
    const std::string key = scene + "/" + cage;
    {
      std::lock_guard lock(mutex);
      auto it = engines.find(key);
      if (it != engines.end()) return it->second;
    }
    auto engine = std::make_shared<DeformEngine>(load_scene(scene), load_obj(dir("cages") / (cage + ".obj")),
                                                 dir("tables"));
    std::lock_guard lock(mutex);
    engines[key] = engine;
    return engine;
  }

  void work() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return stopping || pending; });
        if (stopping) return;
        job = std::move(pending);
        pending.reset();
        if (job->cancel) {
          job->status = JobStatus::Cancelled;
          persist(*job);
          busy = false;
          cv.notify_all();
          continue;
        }
        job->status = JobStatus::Running;
        persist(*job);
      }
      run_job(*job);
      {
        std::lock_guard lock(mutex);
        busy = false;
      }
      cv.notify_all();
    }
  }

  void run_job(Job& job) {
    const fs::path out = dir("jobs") / job.id;
    try {
      auto engine = engine_for(job.scene, job.cage);
      DeformJob dj;
      dj.sketch_view = job.view;
      dj.target = read_png_gray(out / "target.png");
      dj.config = job.config;
      dj.guidance = guidance.get();
      dj.output_dir = out;
      dj.cancel = &job.cancel;
      dj.on_iteration = [&](const IterationRecord& r) {
        std::lock_guard lock(mutex);
        job.iteration = r.iteration + 1;
        if (r.iteration == 0) job.initial_l_sil = r.l_sil;
        job.loss_sil.push_back(r.l_sil);
        job.loss_total.push_back(r.l_total);
        if (job.config.checkpoint_every > 0 && job.iteration % job.config.checkpoint_every == 0) persist(job);
      };
      const DeformResult res = run(*engine, dj);

      save_ply(export_deformed(res.state.splats).cloud, out / "result.ply");
      save_params(res.params, out / "params.bin");
      save_obj(res.state.cage.vertices, engine->cage().faces, out / "deformed_cage.obj");
      write_png(res.final_mask, out / "final_mask.png");
      write_png(render_color(res.state.splats, job.view), out / "final_color.png");

      std::lock_guard lock(mutex);
      job.final_l_sil = res.final_l_sil;
      job.final_iou = mask_iou(res.final_mask, dj.target);
      const std::string base = "/files/jobs/" + job.id + "/";
      job.artifacts = {{"ply", base + "result.ply"},          {"params", base + "params.bin"},
                       {"cage", base + "deformed_cage.obj"},  {"mask", base + "final_mask.png"},
                       {"color", base + "final_color.png"},   {"loss_csv", base + "loss.csv"},
                       {"target", base + "target.png"}, {"sketch", base + "sketch.png"}};
      job.status = JobStatus::Done;
      persist(job);
    } catch (const Error& e) {
      std::lock_guard lock(mutex);
      if (e.code() == ErrorCode::Cancelled) {
        job.status = JobStatus::Cancelled;
      } else {
        job.status = JobStatus::Failed;
        job.error = std::string(to_string(e.code())) + ": " + e.what();
      }
      persist(job);
    } catch (const HttpError& e) {
      std::lock_guard lock(mutex);
      job.status = JobStatus::Failed;
      job.error = e.message;
      persist(job);
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex);
      job.status = JobStatus::Failed;
      job.error = e.what();
      persist(job);
    }
  }

  // -- handlers --------------------------------------------------------------

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler wrap(Handler h, bool mutating) {
    return [this, h = std::move(h), mutating](const httplib::Request& req, httplib::Response& res) {
      std::string key;
      if (mutating && req.has_header("Idempotency-Key")) {
        key = req.method + " " + req.path + " " + req.get_header_value("Idempotency-Key");
        std::lock_guard lock(mutex);
        auto it = idempotent.find(key);
        if (it != idempotent.end()) {
          const auto& [status, type, body] = it->second;
          res.status = status;
          res.set_content(body, type);
          res.set_header("Idempotent-Replay", "true");
          return;
        }
      }
      try {
        h(req, res);
      } catch (const HttpError& e) {
        res.status = e.status;
        res.set_content(json{{"error", e.code}, {"message", e.message}}.dump(), "application/json");
      } catch (const Error& e) {
        res.status = status_for(e.code());
        res.set_content(json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                        "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(json{{"error", "Internal"}, {"message", e.what()}}.dump(), "application/json");
      }
      if (!key.empty() && res.status < 500) {
        std::lock_guard lock(mutex);
        idempotent.emplace(key, std::make_tuple(res.status, res.get_header_value("Content-Type"), res.body));
      }
    };
  }

  void routes() {
    server.set_payload_max_length(std::size_t{1} << 30);
    if (config.cors) {
      server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      });
    }
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/scenes", wrap([this](const auto& req, auto& res) { post_scene(req, res); }, true));
    server.Get(R"(/scenes/([A-Za-z0-9-]+)/render)",
               wrap([this](const auto& req, auto& res) { get_render(req, res); }, false));
    server.Post(R"(/scenes/([A-Za-z0-9-]+)/cage)",
                wrap([this](const auto& req, auto& res) { post_cage(req, res); }, true));
    server.Post("/jobs", wrap([this](const auto& req, auto& res) { post_job(req, res); }, true));
    server.Get(R"(/jobs/([A-Za-z0-9-]+))", wrap([this](const auto& req, auto& res) { get_job(req, res); }, false));
    server.Get(R"(/jobs/([A-Za-z0-9-]+)/result)",
               wrap([this](const auto& req, auto& res) { get_result(req, res); }, false));
    server.Post(R"(/jobs/([A-Za-z0-9-]+)/cancel)",
                wrap([this](const auto& req, auto& res) { post_cancel(req, res); }, true));
    server.Post("/animations", wrap([this](const auto& req, auto& res) { post_animation(req, res); }, true));
    server.Get(R"(/files/(.+))", wrap([this](const auto& req, auto& res) { get_file(req, res); }, false));
  }

  void post_scene(const httplib::Request& req, httplib::Response& res) {
    std::vector<std::uint8_t> bytes;
    const std::string type = req.get_header_value("Content-Type");
    if (type.rfind("application/json", 0) == 0) {
      const json j = parse_body(req);
      if (!j.contains("path")) throw HttpError{400, "InvalidArgument", "expected {\"path\": ...}"};
      bytes = read_file(j.at("path").get<std::string>());
    } else {
      bytes.assign(req.body.begin(), req.body.end());
    }
    const SplatCloud cloud = parse_ply(bytes);  // 422 on invalid PLY
    validate(cloud);
    const std::string id = sha256_hex(bytes).substr(0, 16);
    const fs::path d = dir("scenes") / id;
    fs::create_directories(d);
    if (!fs::exists(d / "scene.ply")) {
      write_file(d / "scene.ply", std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    res.status = 201;
    res.set_content(json{{"id", id}, {"count", cloud.count()}}.dump(), "application/json");
  }

  void get_render(const httplib::Request& req, httplib::Response& res) {
    const auto cloud = load_scene(req.matches[1]);
    auto num = [&](const char* a, const char* b, double def) {
      if (req.has_param(a)) return std::stod(req.get_param_value(a));
      if (b && req.has_param(b)) return std::stod(req.get_param_value(b));
      return def;
    };
    CameraView v;
    try {
      v.elevation = num("elev", "elevation", 0.0);
      v.azimuth = num("azim", "azimuth", 0.0);
      v.radius = num("radius", nullptr, v.radius);
      v.fov_y = num("fov", "fov_y", v.fov_y);
      v.width = static_cast<int>(num("w", "width", v.width));
      v.height = static_cast<int>(num("h", "height", v.height));
    } catch (const std::exception&) {
      throw HttpError{400, "InvalidArgument", "view parameters must be numbers"};
    }
    validate(v);
    const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "color";
    std::vector<std::uint8_t> png;
    if (mode == "silhouette") {
      png = encode_png(render_silhouette(*cloud, v));
    } else if (mode == "color") {
      png = encode_png(render_color(*cloud, v));
    } else {
      throw HttpError{400, "InvalidArgument", "mode must be color or silhouette"};
    }
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void post_cage(const httplib::Request& req, httplib::Response& res) {
    const std::string scene = req.matches[1];
    const auto cloud = load_scene(scene);
    const json j = req.body.empty() ? json::object() : parse_body(req);
    CageOptions o;
    o.resolution = j.value("resolution", o.resolution);
    o.offset_cells = j.value("offset", o.offset_cells);
    o.target_vertices = j.value("target_vertices", o.target_vertices);
    o.padding = j.value("padding", o.padding);
    const json meta = {{"scene", scene},
                       {"resolution", o.resolution},
                       {"offset", o.offset_cells},
                       {"target_vertices", o.target_vertices},
                       {"padding", o.padding}};
    const std::string id = sha256_hex(meta.dump()).substr(0, 16);
    const fs::path obj = dir("cages") / (id + ".obj");
    json out = meta;
    if (!fs::exists(obj)) {
      const CageMesh cage = build_cage(centroids(*cloud), o);
      save_obj(cage, obj);
      out["vertices"] = cage.num_vertices();
      out["faces"] = cage.num_faces();
      write_file(dir("cages") / (id + ".json"), out.dump(2));
    } else {
      out = load_cage_meta(id);
    }
    out["id"] = id;
    out["obj"] = "/files/cages/" + id + ".obj";
    res.status = 201;
    res.set_content(out.dump(), "application/json");
  }

  void post_job(const httplib::Request& req, httplib::Response& res) {
    const json j = parse_body(req);
    for (const char* f : {"scene", "cage", "sketch", "view"}) {
      if (!j.contains(f)) throw HttpError{400, "InvalidArgument", std::string("missing field '") + f + "'"};
    }
    auto job = std::make_shared<Job>();
    job->scene = j.at("scene").get<std::string>();
    job->cage = j.at("cage").get<std::string>();
    load_scene(job->scene);
    const json cage_meta = load_cage_meta(job->cage);
    if (cage_meta.value("scene", "") != job->scene) {
      throw HttpError{422, "MismatchedCages", "cage was built for a different scene"};
    }
    job->view = view_from_json(j.at("view"));
    job->config = config_from_json(j.value("config", json::object()).dump());
    const std::vector<std::uint8_t> png = base64_decode(j.at("sketch").get<std::string>());
    const SilhouetteMask sketch = decode_png_gray(png);
    if (!sketch.same_size(job->view.width, job->view.height)) {
      throw HttpError{422, "DimensionMismatch", "sketch size differs from the view size"};
    }
    const SilhouetteMask target = sketch_to_target(sketch);

    std::lock_guard lock(mutex);
    if (busy || pending) throw HttpError{409, "Conflict", "a job is already queued or running"};
    job->id = "job-" + std::to_string(++job_counter) + "-" + sha256_hex(req.body).substr(0, 8);
    const fs::path d = dir("jobs") / job->id;
    fs::create_directories(d);
    // Stored verbatim so the mask round-trips byte for byte.
    write_file(d / "sketch.png", std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
    write_png(target, d / "target.png");
    jobs[job->id] = job;
    persist(*job);
    pending = job;
    busy = true;
    cv.notify_all();
    res.status = 202;
    res.set_content(json{{"id", job->id}, {"status", "queued"}}.dump(), "application/json");
  }

  std::shared_ptr<Job> find_job(const std::string& id) {
    auto it = jobs.find(id);
    if (it == jobs.end()) not_found("job " + id);
    return it->second;
  }

  void get_job(const httplib::Request& req, httplib::Response& res) {
    json out;
    {
      std::lock_guard lock(mutex);
      out = job_json(*find_job(req.matches[1]));
    }
    res.set_content(out.dump(), "application/json");
  }

  void get_result(const httplib::Request& req, httplib::Response& res) {
    json out;
    {
      std::lock_guard lock(mutex);
      const auto job = find_job(req.matches[1]);
      if (job->status != JobStatus::Done) {
        throw HttpError{409, "NotReady", std::string("job is ") + status_name(job->status)};
      }
      out = {{"id", job->id},
             {"artifacts", job->artifacts},
             {"initial_l_sil", job->initial_l_sil},
             {"final_l_sil", job->final_l_sil},
             {"final_iou", job->final_iou}};
    }
    res.set_content(out.dump(), "application/json");
  }

  void post_cancel(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex);
    const auto job = find_job(req.matches[1]);
    if (job->status == JobStatus::Queued || job->status == JobStatus::Running) job->cancel = true;
    res.set_content(json{{"id", job->id}, {"status", status_name(job->status)}, {"cancel_requested", true}}.dump(),
                    "application/json");
  }

  void post_animation(const httplib::Request& req, httplib::Response& res) {
    const json j = parse_body(req);
    const auto ids = j.value("jobs", std::vector<std::string>{});
    if (ids.size() < 2) throw Error(ErrorCode::InsufficientKeyframes, "at least two jobs are required");
    SequenceOptions opts;
    opts.fps = j.value("fps", 10.0);
    opts.duration = j.value("duration", 1.0);
    opts.mode = parse_interpolation(j.value("interpolation", std::string("jacobian")));
    std::vector<std::shared_ptr<Job>> picked;
    {
      std::lock_guard lock(mutex);
      for (const auto& id : ids) {
        auto job = find_job(id);
        if (job->status != JobStatus::Done) throw HttpError{409, "NotReady", "job " + id + " is not done"};
        picked.push_back(job);
      }
    }
    for (const auto& job : picked) {
      if (job->scene != picked.front()->scene || job->cage != picked.front()->cage) {
        throw Error(ErrorCode::MismatchedCages, "keyframe jobs use different scenes or cages");
      }
    }
    opts.view = j.contains("view") ? view_from_json(j.at("view")) : picked.front()->view;
    std::vector<double> times = j.value("times", std::vector<double>{});
    if (times.empty()) {
      for (std::size_t i = 0; i < picked.size(); ++i) times.push_back(static_cast<double>(i) / (picked.size() - 1));
    }
    if (times.size() != picked.size()) throw HttpError{400, "InvalidArgument", "one time per job required"};

    auto engine = engine_for(picked.front()->scene, picked.front()->cage);
    std::vector<Keyframe> keys;
    for (std::size_t i = 0; i < picked.size(); ++i) {
      keys.push_back(Keyframe::from_params(times[i], load_params(dir("jobs") / picked[i]->id / "params.bin"),
                                           engine->system(), picked[i]->id));
    }
    const std::string id = sha256_hex(req.body).substr(0, 16);
    const fs::path out = dir("animations") / id;
    fs::remove_all(out);
    const SequenceResult seq = render_sequence(keys, *engine, opts, out);
    std::vector<TarEntry> entries;
    for (const auto& p : seq.frames) entries.push_back({p.filename().string(), read_file(p)});
    entries.push_back({"manifest.json", read_file(seq.manifest)});
    const auto tar = make_tar(entries);
    res.set_header("X-Animation-Id", id);
    res.set_header("X-Frame-Count", std::to_string(seq.frames.size()));
    res.set_content(std::string(tar.begin(), tar.end()), "application/x-tar");
  }

  void get_file(const httplib::Request& req, httplib::Response& res) {
    const fs::path rel = fs::path(std::string(req.matches[1])).lexically_normal();
    if (rel.is_absolute() || rel.empty() || *rel.begin() == "..") not_found("file");
    const fs::path p = config.workspace / rel;
    if (!fs::is_regular_file(p)) not_found("file");
    const auto bytes = read_file(p);
    const std::string ext = p.extension().string();
    const char* type = ext == ".png"    ? "image/png"
                       : ext == ".json" ? "application/json"
                       : ext == ".csv"  ? "text/csv"
                       : ext == ".obj"  ? "text/plain"
                                        : "application/octet-stream";
    res.set_content(std::string(bytes.begin(), bytes.end()), type);
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() = default;

int Service::bind() {
  if (impl_->port >= 0) return impl_->port;
  if (impl_->config.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->port = impl_->config.port;
  }
  if (impl_->port <= 0) {
    throw Error(ErrorCode::IoError, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  return impl_->port;
}

void Service::serve() {
  bind();
  impl_->server.listen_after_bind();
}

void Service::stop() { impl_->server.stop(); }

void Service::wait_idle() {
  std::unique_lock lock(impl_->mutex);
  impl_->cv.wait(lock, [&] { return !impl_->busy && !impl_->pending; });
}

const ServiceConfig& Service::config() const { return impl_->config; }

}  // namespace splatcage
