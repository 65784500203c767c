#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "splatcage/cage.hpp"
#include "splatcage/image.hpp"
#include "splatcage/raster.hpp"
#include "splatcage/synthetic.hpp"

using namespace splatcage;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "splatcage");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/// Scene, cage and a sketch shifted two pixels to the right.
struct Workspace {
  oracle::TempDir dir{"cli"};
  std::string scene, cage, sketch;

  Workspace() {
    scene = (dir / "scene.ply").string();
    cage = (dir / "cage.obj").string();
    sketch = (dir / "sketch.png").string();
    const SplatCloud cloud = fixture::small_cloud(80, 5, 0.4, 0.1);
    save_ply(cloud, scene);
    save_obj(icosphere(1, 1.2), cage);
    CameraView v;
    v.radius = 3.0;
    v.width = v.height = 32;
    write_png(threshold(render_silhouette(translate_cloud(cloud, Vec3(0.1, 0, 0)), v), 0.5), sketch);
  }
};

}  // namespace

TEST_CASE("cli usage and help") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"render", "--help"}).code == 0);
  const CliResult bad = cli({"render", "--bogus"});
  CHECK(bad.code == 1);
  CHECK(bad.err.rfind("error=Usage", 0) == 0);
  CHECK(cli({"nosuchcommand"}).code == 1);
}

TEST_CASE("render of an empty scene reports EmptyCloud") {
  oracle::TempDir dir("cli");
  fixture::write_bytes(dir / "empty.ply", fixture::ply_bytes({}));
  const CliResult r = cli({"render", "--scene", (dir / "empty.ply").string(), "--out", (dir / "x.png").string()});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error=EmptyCloud", 0) == 0);
}

TEST_CASE("deform echoes the default configuration") {
  Workspace ws;
  const CliResult r = cli({"deform", "--scene", ws.scene, "--cage", ws.cage, "--sketch",
                           (ws.dir / "missing.png").string(), "--out", (ws.dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.out.rfind("config iterations=2000 learning_rate=0.002 alpha=10000 num_random_views=4 ", 0) == 0);
  CHECK(r.err.rfind("error=IoError", 0) == 0);

  fixture::write_bytes(ws.dir / "cfg.json", R"({"iterations": 300, "alpha": 5})");
  const CliResult merged = cli({"deform", "--scene", ws.scene, "--cage", ws.cage, "--sketch",
                                (ws.dir / "missing.png").string(), "--config", (ws.dir / "cfg.json").string(),
                                "--alpha", "7", "--out", (ws.dir / "o").string()});
  CHECK(merged.out.rfind("config iterations=300 learning_rate=0.002 alpha=7 ", 0) == 0);
}

TEST_CASE("convert, cage and render") {
  oracle::TempDir dir("cli");
  save_obj(icosphere(2, 0.5), dir / "mesh.obj");
  CHECK(cli({"convert", "--mesh", (dir / "mesh.obj").string(), "--samples", "3000", "--out",
             (dir / "s.ply").string()})
            .code == 0);
  CHECK(load_ply(dir / "s.ply").count() == 3000);
  const CliResult c = cli({"cage", "--in", (dir / "s.ply").string(), "--res", "32", "--verts", "60", "--out",
                           (dir / "c.obj").string()});
  CHECK(c.code == 0);
  const CageMesh cage = load_obj(dir / "c.obj");
  CHECK_NOTHROW(validate_cage(cage));
  CHECK(winding_number(cage.vertices, cage.faces, Vec3(0.5, 0, 0)) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK(cli({"render", "--scene", (dir / "s.ply").string(), "--w", "40", "--h", "30", "--mode", "silhouette",
             "--out", (dir / "r.png").string()})
            .code == 0);
  const SilhouetteMask m = read_png_gray(dir / "r.png");
  CHECK(m.width == 40);
  CHECK(m.height == 30);
  CHECK(cli({"render", "--scene", (dir / "s.ply").string(), "--mode", "depth", "--out", (dir / "r.png").string()})
            .code == 2);
}

TEST_CASE("deform outputs are byte reproducible and animate") {
  Workspace ws;
  auto deform = [&](const std::string& out, const std::string& iters) {
    return cli({"deform", "--scene", ws.scene, "--cage", ws.cage, "--sketch", ws.sketch, "--radius", "3", "--iters",
                iters, "--views", "2", "--out", (ws.dir / out).string()});
  };
  const CliResult a = deform("a", "15"), b = deform("b", "15"), c = deform("c", "5");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  for (const char* f : {"result.ply", "params.bin", "deformed_cage.obj", "final_mask.png", "loss.csv", "config.json"}) {
    CAPTURE(f);
    CHECK(fixture::read_bytes(ws.dir / "a" / f) == fixture::read_bytes(ws.dir / "b" / f));
  }
  const auto meta = nlohmann::json::parse(fixture::read_bytes(ws.dir / "a" / "job.json"));
  CHECK(meta["final_l_sil"].get<double>() <= meta["initial_l_sil"].get<double>());

  const CliResult anim = cli({"animate", "--jobs", (ws.dir / "c").string() + "," + (ws.dir / "a").string(), "--fps",
                              "3", "--duration", "1", "--out", (ws.dir / "anim").string()});
  CHECK(anim.code == 0);
  CHECK(std::filesystem::exists(ws.dir / "anim" / "frame_00002.png"));
  CHECK(std::filesystem::exists(ws.dir / "anim" / "manifest.json"));
  CHECK(cli({"animate", "--jobs", (ws.dir / "a").string(), "--out", (ws.dir / "x").string()}).code == 2);
}

TEST_CASE("ablate writes one row per parameterization and seed") {
  oracle::TempDir dir("cli");
  const CliResult r = cli({"ablate", "--benchmark", "bending", "--seeds", "3", "--iters", "2", "--splats", "300",
                           "--size", "32", "--cage-verts", "40", "--out", (dir / "a.csv").string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(fixture::read_bytes(dir / "a.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "benchmark,parameterization,seed,final_l_sil,initial_l_sil,iou,max_flipped_faces");
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(line.rfind("bending,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 9);
}
