#include <doctest.h>

#include <chrono>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "splatcage/hash.hpp"
#include "splatcage/image.hpp"
#include "splatcage/jacobian_field.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/service.hpp"
#include "splatcage/splat.hpp"

// After the Eigen-based headers: <resolv.h> defines a `_res` macro.
#include <httplib.h>

using namespace splatcage;
using nlohmann::json;

namespace {

/// Service on a free port over a scratch workspace, torn down on scope exit.
class Running {
 public:
  explicit Running(const std::filesystem::path& workspace, const std::string& guidance = "none") {
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.workspace = workspace;
    cfg.guidance = guidance;
    service = std::make_unique<Service>(cfg);
    port = service->bind();
    thread_ = std::thread([this] { service->serve(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(120, 0);
    for (int i = 0; i < 200; ++i) {
      if (client->Get("/jobs/none")) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Running() {
    service->stop();
    thread_.join();
  }
  std::unique_ptr<Service> service;
  std::unique_ptr<httplib::Client> client;
  int port = 0;

 private:
  std::thread thread_;
};

std::string scene_bytes() {
  const auto bytes = serialize_ply(fixture::small_cloud(60, 17, 0.4, 0.1));
  return {bytes.begin(), bytes.end()};
}

CameraView job_view() {
  CameraView v;
  v.elevation = 10;
  v.azimuth = 20;
  v.radius = 3;
  v.width = v.height = 32;
  return v;
}

json view_json(const CameraView& v) {
  return {{"elevation", v.elevation}, {"azimuth", v.azimuth}, {"radius", v.radius},
          {"fov_y", v.fov_y},         {"width", v.width},     {"height", v.height}};
}

std::string post_scene(httplib::Client& c) {
  auto r = c.Post("/scenes", scene_bytes(), "application/octet-stream");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return json::parse(r->body)["id"];
}

std::string post_cage(httplib::Client& c, const std::string& scene) {
  auto r = c.Post("/scenes/" + scene + "/cage", R"({"resolution": 24, "target_vertices": 40})", "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 201);
  return json::parse(r->body)["id"];
}

/// Sketch PNG: the thresholded silhouette of the scene, optionally shifted in x.
std::vector<std::uint8_t> sketch_png(int shift = 0) {
  const SilhouetteMask m = threshold(render_silhouette(fixture::small_cloud(60, 17, 0.4, 0.1), job_view()), 0.5);
  SilhouetteMask s(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const int sx = x - shift;
      if (sx >= 0 && sx < m.width) s.at(x, y) = m.at(sx, y);
    }
  }
  return encode_png(s);
}

json job_body(const std::string& scene, const std::string& cage, int iterations, int shift = 0) {
  return {{"scene", scene},
          {"cage", cage},
          {"sketch", base64_encode(sketch_png(shift))},
          {"view", view_json(job_view())},
          {"config", {{"iterations", iterations}, {"num_random_views", 0}, {"checkpoint_every", 5}}}};
}

std::string submit(httplib::Client& c, const json& body) {
  auto r = c.Post("/jobs", body.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 202);
  return json::parse(r->body)["id"];
}

json get_json(httplib::Client& c, const std::string& path) {
  auto r = c.Get(path);
  REQUIRE(r);
  return json::parse(r->body);
}

}  // namespace

TEST_CASE("scenes, renders and cages") {
  oracle::TempDir ws("svc");
  Running s(ws.path());
  const std::string id = post_scene(*s.client);
  CHECK(id.size() == 16);
  CHECK(id == sha256_hex(scene_bytes()).substr(0, 16));
  CHECK(post_scene(*s.client) == id);

  auto bad = s.client->Post("/scenes", "ply\nformat ascii 1.0\nend_header\n", "application/octet-stream");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  CHECK(json::parse(bad->body)["error"] == "MalformedHeader");

  auto img = s.client->Get("/scenes/" + id + "/render?elev=10&azim=20&radius=3&w=32&h=24&mode=silhouette");
  REQUIRE(img);
  CHECK(img->status == 200);
  CHECK(img->get_header_value("Content-Type") == "image/png");
  const SilhouetteMask m = decode_png_gray(std::vector<std::uint8_t>(img->body.begin(), img->body.end()));
  CHECK(m.width == 32);
  CHECK(m.height == 24);
  CameraView v = job_view();
  v.height = 24;
  CHECK(encode_png(m) == encode_png(render_silhouette(fixture::small_cloud(60, 17, 0.4, 0.1), v)));
  auto bad_view = s.client->Get("/scenes/" + id + "/render?w=4");
  REQUIRE(bad_view);
  CHECK(bad_view->status == 400);
  CHECK(json::parse(bad_view->body)["error"] == "ViewInvalid");
  auto missing = s.client->Get("/scenes/0123456789abcdef/render");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  const std::string cage = post_cage(*s.client, id);
  CHECK(post_cage(*s.client, id) == cage);
  auto obj = s.client->Get("/files/cages/" + cage + ".obj");
  REQUIRE(obj);
  CHECK(obj->status == 200);
  auto escape = s.client->Get("/files/../../etc/passwd");
  REQUIRE(escape);
  CHECK(escape->status == 404);
}

TEST_CASE("job lifecycle, mask round trip and animations") {
  oracle::TempDir ws("svc");
  Running s(ws.path());
  httplib::Client& c = *s.client;
  const std::string scene = post_scene(c), cage = post_cage(c, scene);

  const std::string a = submit(c, job_body(scene, cage, 10));
  s.service->wait_idle();
  json ja = get_json(c, "/jobs/" + a);
  CHECK(ja["status"] == "done");
  CHECK(ja["iteration"] == 10);
  CHECK(ja["progress"] == 1.0);
  CHECK(ja["loss"]["l_sil"].size() == 10);
  const json result = get_json(c, "/jobs/" + a + "/result");
  CHECK(result["final_iou"].get<double>() > 0.9);

  // The sketch comes back byte for byte.
  auto sketch = c.Get(result["artifacts"]["sketch"].get<std::string>());
  REQUIRE(sketch);
  const auto sent = sketch_png();
  CHECK(sha256_hex(std::string_view(sketch->body)) == sha256_hex(sent));
  auto mask = c.Get(result["artifacts"]["mask"].get<std::string>());
  REQUIRE(mask);
  CHECK(mask->status == 200);
  auto params = c.Get(result["artifacts"]["params"].get<std::string>());
  REQUIRE(params);
  CHECK(params->status == 200);

  const std::string b = submit(c, job_body(scene, cage, 10, 2));
  s.service->wait_idle();
  CHECK(get_json(c, "/jobs/" + b)["status"] == "done");

  const json anim = {{"jobs", {a, b}}, {"fps", 4}, {"duration", 1}};
  auto tar = c.Post("/animations", anim.dump(), "application/json");
  REQUIRE(tar);
  REQUIRE(tar->status == 200);
  CHECK(tar->get_header_value("X-Frame-Count") == "4");
  const auto entries = read_tar(std::vector<std::uint8_t>(tar->body.begin(), tar->body.end()));
  REQUIRE(entries.size() == 5);
  CHECK(entries[0].name == "frame_00000.png");
  CHECK(entries[4].name == "manifest.json");
  CHECK(json::parse(std::string(entries[4].data.begin(), entries[4].data.end()))["frame_count"] == 4);
  auto again = c.Post("/animations", anim.dump(), "application/json");
  REQUIRE(again);
  CHECK(again->body == tar->body);

  auto one = c.Post("/animations", json{{"jobs", {a}}}.dump(), "application/json");
  REQUIRE(one);
  CHECK(one->status == 422);
  CHECK(json::parse(one->body)["error"] == "InsufficientKeyframes");
}

TEST_CASE("busy service answers 409 and cancels") {
  oracle::TempDir ws("svc");
  Running s(ws.path());
  httplib::Client& c = *s.client;
  const std::string scene = post_scene(c), cage = post_cage(c, scene);
  const std::string slow = submit(c, job_body(scene, cage, 100000));
  auto second = c.Post("/jobs", job_body(scene, cage, 5).dump(), "application/json");
  REQUIRE(second);
  CHECK(second->status == 409);
  auto early = c.Get("/jobs/" + slow + "/result");
  REQUIRE(early);
  CHECK(early->status == 409);
  auto cancel = c.Post("/jobs/" + slow + "/cancel", "", "application/json");
  REQUIRE(cancel);
  CHECK(cancel->status == 200);
  s.service->wait_idle();
  CHECK(get_json(c, "/jobs/" + slow)["status"] == "cancelled");
  auto unknown = c.Get("/jobs/job-404");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK(json::parse(unknown->body).contains("error"));
}

TEST_CASE("idempotency keys replay the first answer") {
  oracle::TempDir ws("svc");
  Running s(ws.path());
  httplib::Client& c = *s.client;
  const std::string scene = post_scene(c), cage = post_cage(c, scene);
  const httplib::Headers key{{"Idempotency-Key", "abc-1"}};
  auto first = c.Post("/jobs", key, job_body(scene, cage, 5).dump(), "application/json");
  auto replay = c.Post("/jobs", key, job_body(scene, cage, 5).dump(), "application/json");
  REQUIRE(first);
  REQUIRE(replay);
  CHECK(first->status == 202);
  CHECK(replay->status == 202);
  CHECK(replay->body == first->body);
  s.service->wait_idle();
}

TEST_CASE("cors headers and preflight") {
  oracle::TempDir ws("svc");
  Running s(ws.path());
  auto pre = s.client->Options("/jobs");
  REQUIRE(pre);
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Origin") == "*");
  auto get = s.client->Get("/jobs/job-1");
  REQUIRE(get);
  CHECK(get->has_header("Access-Control-Allow-Origin"));
}

TEST_CASE("restart marks active jobs failed") {
  oracle::TempDir ws("svc");
  std::string done_id;
  {
    Running s(ws.path());
    const std::string scene = post_scene(*s.client), cage = post_cage(*s.client, scene);
    done_id = submit(*s.client, job_body(scene, cage, 3));
    s.service->wait_idle();
  }
  // Forge a job record that was still running when the process died.
  const auto src = ws.path() / "jobs" / done_id / "job.json";
  json rec = json::parse(fixture::read_bytes(src));
  rec["id"] = "job-99-deadbeef";
  rec["status"] = "running";
  std::filesystem::create_directories(ws.path() / "jobs" / "job-99-deadbeef");
  fixture::write_bytes(ws.path() / "jobs" / "job-99-deadbeef" / "job.json", rec.dump());

  Running s(ws.path());
  const json j = get_json(*s.client, "/jobs/job-99-deadbeef");
  CHECK(j["status"] == "failed");
  CHECK(j["reason"] == "restart");
  CHECK(get_json(*s.client, "/jobs/" + done_id)["status"] == "done");
  auto artifact = s.client->Get(get_json(*s.client, "/jobs/" + done_id + "/result")["artifacts"]["ply"].get<std::string>());
  REQUIRE(artifact);
  CHECK(artifact->status == 200);
}

TEST_CASE("tar writer is deterministic and readable") {
  const std::vector<TarEntry> entries{{"a.txt", {'h', 'i'}}, {"b.bin", std::vector<std::uint8_t>(1000, 7)}};
  const auto t1 = make_tar(entries), t2 = make_tar(entries);
  CHECK(t1 == t2);
  CHECK(t1.size() % 512 == 0);
  const auto back = read_tar(t1);
  REQUIRE(back.size() == 2);
  CHECK(back[1].name == "b.bin");
  CHECK(back[1].data == entries[1].data);
}

TEST_CASE("service config from file and environment") {
  oracle::TempDir dir("cfg");
  fixture::write_bytes(dir / "c.json", R"({"host": "0.0.0.0", "port": 9000, "guidance": "none", "cors": false})");
  ServiceConfig c = load_service_config(dir / "c.json");
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9000);
  CHECK_FALSE(c.cors);
  setenv("SPLATCAGE_PORT", "9100", 1);
  c = apply_env(c);
  unsetenv("SPLATCAGE_PORT");
  CHECK(c.port == 9100);
  fixture::write_bytes(dir / "bad.json", R"({"hots": 1})");
  CHECK_THROWS(load_service_config(dir / "bad.json"));
}
