#include "splatcage/synthetic.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"
#include "splatcage/raster.hpp"

namespace splatcage {

namespace {

Vec3 position_color(const Vec3& p, double extent) {
  const Vec3 c = (p / extent).array() * 0.35 + 0.6;
  return c.cwiseMax(0.1).cwiseMin(1.0);
}

Splat isotropic(const Vec3& mu, double scale, double opacity, double extent) {
  Splat s;
  s.mu = mu;
  s.scale = Vec3::Constant(scale);
  s.opacity = opacity;
  s.color = position_color(mu, extent);
  return s;
}

void check_count(int n) {
  if (n <= 0) throw Error(ErrorCode::InvalidArgument, "splat count must be positive");
}

}  // namespace

SplatCloud sphere_cloud(int n, double radius, double splat_scale, std::uint64_t seed, double opacity) {
  check_count(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SplatCloud cloud;
  cloud.splats.reserve(n);
  while (static_cast<int>(cloud.splats.size()) < n) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() > 1.0) continue;
    cloud.splats.push_back(isotropic(radius * p, splat_scale, opacity, radius));
  }
  return cloud;
}

SplatCloud capsule_cloud(int n, double radius, double half_length, double splat_scale, std::uint64_t seed,
                         double opacity) {
  check_count(n);
  std::mt19937_64 rng(seed);
  const double ext = half_length + radius;
  std::uniform_real_distribution<double> ux(-ext, ext), ur(-radius, radius);
  SplatCloud cloud;
  cloud.splats.reserve(n);
  while (static_cast<int>(cloud.splats.size()) < n) {
    const Vec3 p(ux(rng), ur(rng), ur(rng));
    const double cx = std::clamp(p.x(), -half_length, half_length);
    if ((p - Vec3(cx, 0, 0)).squaredNorm() > radius * radius) continue;
    cloud.splats.push_back(isotropic(p, splat_scale, opacity, ext));
  }
  return cloud;
}

SplatCloud bend_cloud(const SplatCloud& cloud, double angle_deg, double half_length) {
  if (!(half_length > 0.0)) throw Error(ErrorCode::InvalidArgument, "half_length must be positive");
  const double kappa = angle_deg * std::numbers::pi / 180.0 / (2.0 * half_length);
  SplatCloud out = cloud;
  if (kappa == 0.0) return out;
  const double R = 1.0 / kappa;
  for (auto& s : out.splats) {
    const Vec3 p = s.mu;
    const double th = kappa * p.x();
    const Vec3 t(std::cos(th), std::sin(th), 0.0);
    const Vec3 n(-std::sin(th), std::cos(th), 0.0);
    s.mu = Vec3(R * std::sin(th), R * (1.0 - std::cos(th)), 0.0) + p.y() * n + Vec3(0, 0, p.z());
    Mat3 J;
    J.col(0) = (1.0 - kappa * p.y()) * t;
    J.col(1) = n;
    J.col(2) = Vec3::UnitZ();
    const ScaleRotation sr = decompose_covariance(J * covariance(s) * J.transpose());
    s.scale = sr.scale;
    s.rot = sr.rot;
  }
  return out;
}

SplatCloud translate_cloud(const SplatCloud& cloud, const Vec3& offset) {
  SplatCloud out = cloud;
  for (auto& s : out.splats) s.mu += offset;
  return out;
}

SplatCloud fixture_cloud(int n, std::uint64_t seed) {
  check_count(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-1.0, 1.0), logs(-5.0, -1.0), logit(-4.0, 4.0), col(-1.0, 1.0);
  std::normal_distribution<double> gauss;
  auto f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  SplatCloud cloud;
  while (static_cast<int>(cloud.splats.size()) < n) {
    Splat s;
    s.mu = Vec3(f32(pos(rng)), f32(pos(rng)), f32(pos(rng)));
    s.color = Vec3(f32(col(rng)), f32(col(rng)), f32(col(rng)));
    s.scale = Vec3(std::exp(f32(logs(rng))), std::exp(f32(logs(rng))), std::exp(f32(logs(rng))));
    s.opacity = 1.0 / (1.0 + std::exp(-f32(logit(rng))));
    Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    // Keep only quaternions whose float32 rounding is a fixed point of
    // normalization, so loading and saving again reproduces the same bytes.
    Eigen::Vector4d qf = q.unaryExpr(f32);
    const Eigen::Vector4d renorm = (qf / qf.norm()).unaryExpr(f32);
    if (renorm != qf) continue;
    s.rot = Quat(qf[0], qf[1], qf[2], qf[3]).normalized();
    cloud.splats.push_back(s);
  }
  return cloud;
}

SplatCloud sample_mesh_surface(const CageMesh& mesh, int n, std::uint64_t seed, double opacity) {
  check_count(n);
  if (mesh.faces.empty()) throw Error(ErrorCode::DegenerateInput, "mesh has no faces");
  std::vector<double> cumulative(mesh.num_faces());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    total += mesh.face_areas[f];
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateInput, "mesh has zero area");
  const double scale = 0.75 * std::sqrt(total / n);
  const double extent = 0.5 * mesh.bbox_diagonal();
  Vec3 center = Vec3::Zero();
  for (const auto& v : mesh.vertices) center += v;
  center /= static_cast<double>(mesh.num_vertices());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SplatCloud cloud;
  cloud.splats.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double r = u(rng) * total;
    const std::size_t f = std::min<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin(), mesh.num_faces() - 1);
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    const auto& t = mesh.faces[f];
    const Vec3 p = mesh.vertices[t[0]] + a * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                   b * (mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    Splat s = isotropic(p, scale, opacity, extent);
    s.color = position_color(p - center, extent);
    s.rot = Quat::FromTwoVectors(Vec3::UnitZ(), mesh.face_normals[f]).normalized();
    cloud.splats.push_back(s);
  }
  return cloud;
}

CageMesh icosphere(int subdivisions, double radius, const Vec3& center) {
  if (subdivisions < 0 || subdivisions > 6) throw Error(ErrorCode::InvalidArgument, "subdivisions must be in [0, 6]");
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, g, 0}, {1, g, 0},  {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                         {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1},  {-g, 0, -1}, {-g, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p = center + radius * p;
  return CageMesh::from(std::move(v), std::move(f));
}

CageMesh box_cage(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v(8);
  for (int c = 0; c < 8; ++c) {
    v[c] = Vec3(c & 1 ? hi.x() : lo.x(), c & 2 ? hi.y() : lo.y(), c & 4 ? hi.z() : lo.z());
  }
  std::vector<Face> f = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                         {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return CageMesh::from(std::move(v), std::move(f));
}

namespace {

CageMesh benchmark_cage(const SplatCloud& cloud, const BenchmarkOptions& o) {
  CageOptions co;
  co.resolution = o.cage_resolution;
  co.target_vertices = o.cage_vertices;
  return build_cage(centroids(cloud), co);
}

CameraView benchmark_view(int size) {
  CameraView view;
  view.width = view.height = size;
  return view;
}

}  // namespace

Benchmark translation_benchmark(const BenchmarkOptions& o) {
  const double radius = 0.6;
  const double spacing = std::cbrt(4.0 / 3.0 * std::numbers::pi * radius * radius * radius / o.splats);
  Benchmark b;
  b.name = "translation";
  b.view = benchmark_view(o.image_size);
  auto cloud = std::make_shared<SplatCloud>(sphere_cloud(o.splats, radius, 0.7 * spacing, o.scene_seed));
  const Camera cam = Camera::from_view(b.view);
  const double depth = (b.view.look_at - cam.position).norm();
  const double shift = 0.1 * b.view.width * depth / cam.fx;
  const Vec3 right = cam.rotation.row(0).transpose();
  b.target_cloud = translate_cloud(*cloud, shift * right);
  b.target = render_silhouette(b.target_cloud, b.view);
  b.cage = benchmark_cage(*cloud, o);
  b.cloud = std::move(cloud);
  return b;
}

Benchmark bending_benchmark(const BenchmarkOptions& o) {
  const double radius = 0.3, half = 1.0;
  const double volume = std::numbers::pi * radius * radius * (2.0 * half + 4.0 / 3.0 * radius);
  const double spacing = std::cbrt(volume / o.splats);
  Benchmark b;
  b.name = "bending";
  b.view = benchmark_view(o.image_size);
  auto cloud = std::make_shared<SplatCloud>(capsule_cloud(o.splats, radius, half, 0.7 * spacing, o.scene_seed));
  b.target_cloud = bend_cloud(*cloud, 30.0, half);
  b.target = render_silhouette(b.target_cloud, b.view);
  b.cage = benchmark_cage(*cloud, o);
  b.cloud = std::move(cloud);
  return b;
}

Benchmark make_benchmark(const std::string& name, const BenchmarkOptions& options) {
  if (name == "translation") return translation_benchmark(options);
  if (name == "bending") return bending_benchmark(options);
  throw Error(ErrorCode::InvalidArgument, "unknown benchmark '" + name + "'");
}

}  // namespace splatcage
