#include <algorithm>
#include <limits>
#include <optional>
#include <queue>

#include <Eigen/Dense>

#include "splatcage/cage_gen.hpp"

namespace splatcage {

namespace {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

struct Candidate {
  double cost;
  int a, b;
  unsigned stamp_a, stamp_b;
  Vec3 target;
  bool operator>(const Candidate& o) const {
    if (cost != o.cost) return cost > o.cost;
    if (a != o.a) return a > o.a;
    return b > o.b;
  }
};

class Decimator {
 public:
  explicit Decimator(const TriangleSoup& mesh) : pos_(mesh.vertices), faces_(mesh.faces) {
    const std::size_t nv = pos_.size();
    vfaces_.resize(nv);
    quadric_.assign(nv, Mat4::Zero());
    stamp_.assign(nv, 0);
    alive_v_.assign(nv, 1);
    alive_f_.assign(faces_.size(), 1);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const auto& t = faces_[f];
      Vec3 n = (pos_[t[1]] - pos_[t[0]]).cross(pos_[t[2]] - pos_[t[0]]);
      const double area2 = n.norm();
      if (area2 > 0.0) n /= area2;
      const Vec4 plane(n.x(), n.y(), n.z(), -n.dot(pos_[t[0]]));
      const Mat4 q = 0.5 * area2 * plane * plane.transpose();
      for (int v : t) {
        vfaces_[v].push_back(static_cast<int>(f));
        quadric_[v] += q;
      }
    }
    live_vertices_ = static_cast<int>(nv);
  }

  void run(int target) {
    for (int v = 0; v < static_cast<int>(pos_.size()); ++v) {
      for (int u : neighbors(v)) {
        if (v < u) push(v, u);
      }
    }
    while (live_vertices_ > target && !heap_.empty()) {
      const Candidate c = heap_.top();
      heap_.pop();
      if (!alive_v_[c.a] || !alive_v_[c.b]) continue;
      if (stamp_[c.a] != c.stamp_a || stamp_[c.b] != c.stamp_b) continue;
      const auto target = collapse_target(c.a, c.b, c.target);
      if (!target) continue;
      collapse(c.a, c.b, *target);
    }
  }

  TriangleSoup result() const {
    TriangleSoup out;
    std::vector<int> remap(pos_.size(), -1);
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      if (alive_v_[v] && !vfaces_[v].empty()) {
        remap[v] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(pos_[v]);
      }
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!alive_f_[f]) continue;
      const auto& t = faces_[f];
      out.faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    }
    return out;
  }

 private:
  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vfaces_[v]) {
      for (int u : faces_[f]) {
        if (u != v) out.push_back(u);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void push(int a, int b) {
    const Mat4 q = quadric_[a] + quadric_[b];
    Mat3 A = q.topLeftCorner<3, 3>();
    const Vec3 rhs = -q.topRightCorner<3, 1>();
    Vec3 best = 0.5 * (pos_[a] + pos_[b]);
    auto cost_at = [&](const Vec3& x) {
      const Vec4 h(x.x(), x.y(), x.z(), 1.0);
      return std::max(0.0, h.dot(q * h));
    };
    double best_cost = cost_at(best);
    Eigen::FullPivLU<Mat3> lu(A);
    lu.setThreshold(1e-10);
    if (lu.isInvertible()) {
      const Vec3 x = lu.solve(rhs);
      // Stay near the edge; far-away optima come from nearly flat regions.
      const double len = (pos_[a] - pos_[b]).norm();
      if ((x - best).norm() < 2.0 * len) {
        const double c = cost_at(x);
        if (c <= best_cost) {
          best = x;
          best_cost = c;
        }
      }
    }
    for (const Vec3& x : {pos_[a], pos_[b]}) {
      const double c = cost_at(x);
      if (c < best_cost) {
        best = x;
        best_cost = c;
      }
    }
    heap_.push({best_cost, a, b, stamp_[a], stamp_[b], best});
  }

  static double quality(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
    const double e = std::max({(p1 - p0).squaredNorm(), (p2 - p1).squaredNorm(), (p0 - p2).squaredNorm()});
    return e > 0.0 ? (p1 - p0).cross(p2 - p0).norm() / e : 0.0;
  }

  bool topology_ok(int a, int b) const {
    if (live_vertices_ <= kMinCageVertices) return false;
    // Link condition: the two endpoints may share only the two vertices
    // opposite the edge, otherwise the collapse pinches the surface.
    const auto na = neighbors(a), nb = neighbors(b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    if (common.size() != 2) return false;
    // Result must not have vertices of valence < 3.
    for (int c : common) {
      if (neighbors(c).size() <= 3) return false;
    }
    return true;
  }

  // Quality is 2 area / longest edge^2 (0.866 for equilateral). A collapse
  // may not push the worst face of the neighbourhood under 0.02 unless the
  // neighbourhood was already that bad (marching-tetrahedra output has many
  // slivers; removing them needs collapses through them).
  bool geometry_ok(int a, int b, const Vec3& target) const {
    double worst_before = std::numeric_limits<double>::infinity();
    double worst_after = std::numeric_limits<double>::infinity();
    for (int v : {a, b}) {
      for (int f : vfaces_[v]) {
        const auto& t = faces_[f];
        std::array<Vec3, 3> p{pos_[t[0]], pos_[t[1]], pos_[t[2]]};
        const double q0 = quality(p[0], p[1], p[2]);
        worst_before = std::min(worst_before, q0);
        const bool has_a = t[0] == a || t[1] == a || t[2] == a;
        const bool has_b = t[0] == b || t[1] == b || t[2] == b;
        if (has_a && has_b) continue;
        const Vec3 n0 = (p[1] - p[0]).cross(p[2] - p[0]);
        for (int k = 0; k < 3; ++k) {
          if (t[k] == v) p[k] = target;
        }
        const Vec3 n1 = (p[1] - p[0]).cross(p[2] - p[0]);
        const double l1 = n1.norm(), l0 = n0.norm();
        if (!(l1 > 0.0)) return false;
        // Normals of near-degenerate faces are noise; only well-shaped faces
        // are protected against flipping.
        if (q0 >= 0.02 && n1.dot(n0) < 0.2 * l1 * l0) return false;
        worst_after = std::min(worst_after, quality(p[0], p[1], p[2]));
      }
    }
    return worst_after >= 0.02 || worst_after >= worst_before;
  }

  // Accepted target position, trying the quadric optimum first.
  std::optional<Vec3> collapse_target(int a, int b, const Vec3& target) const {
    if (!topology_ok(a, b)) return std::nullopt;
    for (const Vec3& x : {target, Vec3(0.5 * (pos_[a] + pos_[b])), pos_[a], pos_[b]}) {
      if (geometry_ok(a, b, x)) return x;
    }
    return std::nullopt;
  }

  void collapse(int a, int b, const Vec3& target) {
    for (int f : vfaces_[b]) {
      auto& t = faces_[f];
      const bool has_a = t[0] == a || t[1] == a || t[2] == a;
      if (has_a) {
        alive_f_[f] = 0;
        for (int v : t) {
          if (v != a && v != b) {
            auto& list = vfaces_[v];
            list.erase(std::remove(list.begin(), list.end(), f), list.end());
          }
        }
      } else {
        for (int& v : t) {
          if (v == b) v = a;
        }
        vfaces_[a].push_back(f);
      }
    }
    auto& fa = vfaces_[a];
    fa.erase(std::remove_if(fa.begin(), fa.end(), [&](int f) { return !alive_f_[f]; }), fa.end());
    vfaces_[b].clear();
    alive_v_[b] = 0;
    --live_vertices_;
    pos_[a] = target;
    quadric_[a] += quadric_[b];
    ++stamp_[a];
    for (int u : neighbors(a)) {
      ++stamp_[u];
    }
    for (int u : neighbors(a)) {
      push(a, u);
      for (int w : neighbors(u)) {
        if (w != a) push(std::min(u, w), std::max(u, w));
      }
    }
  }

  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  std::vector<std::vector<int>> vfaces_;
  std::vector<Mat4> quadric_;
  std::vector<unsigned> stamp_;
  std::vector<char> alive_v_, alive_f_;
  int live_vertices_ = 0;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
};

}  // namespace

TriangleSoup decimate(const TriangleSoup& mesh, int target_vertices) {
  Decimator d(mesh);
  d.run(std::max(target_vertices, kMinCageVertices));
  return d.result();
}

}  // namespace splatcage
