#include <algorithm>
#include <unordered_map>

#include "splatcage/cage_gen.hpp"
#include "splatcage/error.hpp"

namespace splatcage {

namespace {

// Kuhn (Freudenthal) split of the unit cube into 6 tetrahedra around the
// 0-7 diagonal. Corner c has offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
// The split is the same in every cube, so neighbouring cubes agree on their
// shared face diagonals and the extracted surface has no cracks.
constexpr int kTets[6][4] = {
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
};

}  // namespace

TriangleSoup isosurface(const ScalarGrid& grid, double iso) {
  const auto [nx, ny, nz] = grid.dims;
  TriangleSoup soup;
  if (nx < 2 || ny < 2 || nz < 2) return soup;

  // Working copy: boundary nodes pushed outside; values sitting exactly on
  // the iso level nudged outward so no surface vertex lands on a grid node.
  const double nudge = 1e-9 * grid.spacing;
  std::vector<double> v(grid.values);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double& x = v[grid.index(i, j, k)];
        const bool border = i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
        if (border) x = std::max(x, iso + grid.spacing);
        if (x >= iso) x = std::max(x, iso + nudge);
      }
    }
  }

  std::unordered_map<std::uint64_t, int> edge_vertex;
  auto split = [&](std::size_t a, std::size_t b, const Vec3& pa, const Vec3& pb) -> int {
    const std::size_t lo = std::min(a, b), hi = std::max(a, b);
    const std::uint64_t key = static_cast<std::uint64_t>(lo) * grid.values.size() + hi;
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double t = (iso - v[a]) / (v[b] - v[a]);
    soup.vertices.push_back(pa + t * (pb - pa));
    const int id = static_cast<int>(soup.vertices.size()) - 1;
    edge_vertex.emplace(key, id);
    return id;
  };

  auto emit = [&](int p, int q, int r, const Vec3& out_dir) {
    const Vec3 n = (soup.vertices[q] - soup.vertices[p]).cross(soup.vertices[r] - soup.vertices[p]);
    if (n.dot(out_dir) >= 0.0) {
      soup.faces.push_back({p, q, r});
    } else {
      soup.faces.push_back({p, r, q});
    }
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        std::array<std::size_t, 8> idx;
        std::array<Vec3, 8> pos;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
          idx[c] = grid.index(ci, cj, ck);
          pos[c] = grid.node(ci, cj, ck);
        }
        for (const auto& tet : kTets) {
          std::array<int, 4> in{}, out{};
          int n_in = 0, n_out = 0;
          for (int c : tet) {
            if (v[idx[c]] < iso) in[n_in++] = c;
            else out[n_out++] = c;
          }
          if (n_in == 0 || n_out == 0) continue;
          Vec3 cin = Vec3::Zero(), cout = Vec3::Zero();
          for (int m = 0; m < n_in; ++m) cin += pos[in[m]];
          for (int m = 0; m < n_out; ++m) cout += pos[out[m]];
          const Vec3 dir = cout / n_out - cin / n_in;
          auto s = [&](int a, int b) { return split(idx[a], idx[b], pos[a], pos[b]); };
          if (n_in == 1) {
            emit(s(in[0], out[0]), s(in[0], out[1]), s(in[0], out[2]), dir);
          } else if (n_in == 3) {
            emit(s(in[0], out[0]), s(in[1], out[0]), s(in[2], out[0]), dir);
          } else {
            const int p0 = s(in[0], out[0]), p1 = s(in[0], out[1]);
            const int p2 = s(in[1], out[1]), p3 = s(in[1], out[0]);
            emit(p0, p1, p2, dir);
            emit(p0, p2, p3, dir);
          }
        }
      }
    }
  }
  return soup;
}

TriangleSoup largest_component(const TriangleSoup& mesh) {
  if (mesh.faces.empty()) return mesh;
  const auto comps = connected_components(mesh.vertices.size(), mesh.faces);
  std::vector<int> label(mesh.vertices.size(), -1);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (int v : comps[c]) label[v] = static_cast<int>(c);
  }
  std::vector<std::size_t> face_count(comps.size(), 0);
  for (const auto& f : mesh.faces) ++face_count[label[f[0]]];
  const int best = static_cast<int>(std::max_element(face_count.begin(), face_count.end()) - face_count.begin());

  TriangleSoup out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (label[v] == best) {
      remap[v] = static_cast<int>(out.vertices.size());
      out.vertices.push_back(mesh.vertices[v]);
    }
  }
  for (const auto& f : mesh.faces) {
    if (label[f[0]] == best) out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  }
  return out;
}

}  // namespace splatcage
