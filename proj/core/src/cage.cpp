#include "splatcage/cage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "splatcage/error.hpp"

namespace splatcage {

CageMesh CageMesh::from(std::vector<Vec3> vertices, std::vector<Face> faces) {
  CageMesh cage;
  cage.vertices = std::move(vertices);
  cage.faces = std::move(faces);
  cage.face_areas.resize(cage.faces.size());
  cage.face_normals.resize(cage.faces.size());
  const int n = static_cast<int>(cage.vertices.size());
  for (std::size_t t = 0; t < cage.faces.size(); ++t) {
    const Face& f = cage.faces[t];
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= n) throw Error(ErrorCode::InvalidArgument, "face index out of range", t);
    }
    const Vec3 cross = (cage.vertices[f[1]] - cage.vertices[f[0]]).cross(cage.vertices[f[2]] - cage.vertices[f[0]]);
    const double len = cross.norm();
    cage.face_areas[t] = 0.5 * len;
    cage.face_normals[t] = len > 0.0 ? Vec3(cross / len) : Vec3::Zero();
  }
  return cage;
}

double CageMesh::bbox_diagonal() const {
  if (vertices.empty()) return 0.0;
  Vec3 lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

Vec3 CageMesh::vertex_mean() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& v : vertices) sum += v;
  return vertices.empty() ? sum : Vec3(sum / static_cast<double>(vertices.size()));
}

double CageMesh::signed_volume() const {
  double vol = 0.0;
  for (const auto& f : faces) {
    vol += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]]));
  }
  return vol / 6.0;
}

DeformedCage DeformedCage::rest(const CageMesh& cage) {
  return DeformedCage{cage.vertices, cage.face_normals};
}

std::vector<Vec3> compute_face_normals(std::span<const Vec3> vertices, std::span<const Face> faces) {
  std::vector<Vec3> normals(faces.size());
  for (std::size_t t = 0; t < faces.size(); ++t) {
    const Face& f = faces[t];
    const Vec3 c = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    const double len = c.norm();
    normals[t] = len > 0.0 ? Vec3(c / len) : Vec3::Zero();
  }
  return normals;
}

std::size_t count_flipped_faces(const CageMesh& rest, std::span<const Vec3> deformed_vertices) {
  const auto normals = compute_face_normals(deformed_vertices, rest.faces);
  std::size_t flipped = 0;
  for (std::size_t t = 0; t < normals.size(); ++t) {
    if (normals[t].dot(rest.face_normals[t]) < 0.0) ++flipped;
  }
  return flipped;
}

std::vector<std::vector<int>> connected_components(std::size_t num_vertices, std::span<const Face> faces) {
  std::vector<int> parent(num_vertices);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<char> used(num_vertices, 0);
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      used[f[k]] = 1;
      const int a = find(f[k]), b = find(f[(k + 1) % 3]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::map<int, std::vector<int>> groups;
  for (std::size_t v = 0; v < num_vertices; ++v) {
    if (used[v]) groups[find(static_cast<int>(v))].push_back(static_cast<int>(v));
  }
  std::vector<std::vector<int>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

MeshReport inspect(const CageMesh& cage) {
  MeshReport report;
  const std::size_t nv = cage.vertices.size();
  std::map<std::pair<int, int>, int> directed;
  std::map<std::pair<int, int>, int> undirected;
  for (const auto& f : cage.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      directed[{a, b}]++;
      undirected[{std::min(a, b), std::max(a, b)}]++;
    }
  }
  bool edges_ok = !cage.faces.empty();
  for (const auto& [e, count] : undirected) {
    if (count != 2) edges_ok = false;
  }
  bool oriented = edges_ok;
  for (const auto& [e, count] : directed) {
    if (count != 1 || !directed.count({e.second, e.first})) oriented = false;
  }

  // Each vertex's incident faces must form a single fan (disk link).
  bool disks = edges_ok;
  if (edges_ok) {
    std::vector<std::vector<int>> incident(nv);
    for (std::size_t t = 0; t < cage.faces.size(); ++t) {
      for (int k = 0; k < 3; ++k) incident[cage.faces[t][k]].push_back(static_cast<int>(t));
    }
    for (std::size_t v = 0; v < nv && disks; ++v) {
      const auto& ring = incident[v];
      if (ring.empty()) continue;
      // Union faces sharing an edge through v.
      std::map<int, int> edge_owner;
      std::vector<int> parent(ring.size());
      std::iota(parent.begin(), parent.end(), 0);
      std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
      for (std::size_t i = 0; i < ring.size(); ++i) {
        const Face& f = cage.faces[ring[i]];
        for (int k = 0; k < 3; ++k) {
          if (f[k] == static_cast<int>(v)) continue;
          auto [it, inserted] = edge_owner.emplace(f[k], static_cast<int>(i));
          if (!inserted) parent[find(static_cast<int>(i))] = find(it->second);
        }
      }
      const int root = find(0);
      for (std::size_t i = 1; i < ring.size(); ++i) {
        if (find(static_cast<int>(i)) != root) disks = false;
      }
    }
  }

  const double diag = cage.bbox_diagonal();
  for (double a : cage.face_areas) {
    if (!(a > 1e-10 * diag * diag)) report.degenerate_faces++;
  }
  std::size_t used_vertices = 0;
  {
    std::vector<char> used(nv, 0);
    for (const auto& f : cage.faces) {
      for (int k = 0; k < 3; ++k) used[f[k]] = 1;
    }
    used_vertices = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
  }
  report.closed_manifold = edges_ok && disks && used_vertices == nv;
  report.consistently_oriented = oriented;
  report.components = connected_components(nv, cage.faces).size();
  report.euler_characteristic = static_cast<long>(nv) - static_cast<long>(undirected.size()) +
                                static_cast<long>(cage.faces.size());
  report.signed_volume = cage.signed_volume();
  return report;
}

void validate_cage(const CageMesh& cage) {
  const MeshReport r = inspect(cage);
  if (!r.closed_manifold) throw Error(ErrorCode::NonManifoldOutput, "cage is not a closed 2-manifold");
  if (!r.consistently_oriented) throw Error(ErrorCode::NonManifoldOutput, "cage orientation is inconsistent");
  if (!(r.signed_volume > 0.0)) throw Error(ErrorCode::NonManifoldOutput, "cage is inward oriented");
  if (r.degenerate_faces > 0) throw Error(ErrorCode::NonManifoldOutput, "cage has degenerate faces");
}

double solid_angle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 x = a - p, y = b - p, z = c - p;
  const double lx = x.norm(), ly = y.norm(), lz = z.norm();
  const double numer = x.dot(y.cross(z));
  const double denom = lx * ly * lz + x.dot(y) * lz + x.dot(z) * ly + y.dot(z) * lx;
  return 2.0 * std::atan2(numer, denom);
}

double winding_number(std::span<const Vec3> vertices, std::span<const Face> faces, const Vec3& p) {
  double total = 0.0;
  for (const auto& f : faces) total += solid_angle(p, vertices[f[0]], vertices[f[1]], vertices[f[2]]);
  return total / (4.0 * M_PI);
}

namespace {

// Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

double distance_to_mesh(std::span<const Vec3> vertices, std::span<const Face> faces, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : faces) {
    best = std::min(best, (p - closest_on_triangle(p, vertices[f[0]], vertices[f[1]], vertices[f[2]])).norm());
  }
  return best;
}

CageMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      if (!ls) throw Error(ErrorCode::IoError, "bad vertex line: " + line);
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> ids;
      std::string token;
      while (ls >> token) {
        const int idx = std::stoi(token.substr(0, token.find('/')));
        ids.push_back(idx > 0 ? idx - 1 : static_cast<int>(vertices.size()) + idx);
      }
      if (ids.size() != 3) throw Error(ErrorCode::IoError, "cage OBJ must contain triangles only");
      faces.push_back({ids[0], ids[1], ids[2]});
    }
  }
  return CageMesh::from(std::move(vertices), std::move(faces));
}

void save_obj(std::span<const Vec3> vertices, std::span<const Face> faces, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  char buf[128];
  for (const auto& v : vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void save_obj(const CageMesh& cage, const std::filesystem::path& path) {
  save_obj(cage.vertices, cage.faces, path);
}

}  // namespace splatcage
