#include <cmath>
#include <cstring>
#include <fstream>

#include "splatcage/error.hpp"
#include "splatcage/green.hpp"
#include "splatcage/hash.hpp"
#include "splatcage/triangle_integrals.hpp"

namespace splatcage {

namespace {

constexpr double kInv4Pi = 1.0 / (4.0 * M_PI);

void check_connectivity(const CoordinateTables& tables, const DeformedCage& cage) {
  if (cage.vertices.size() != tables.num_vertices() || cage.face_vectors.size() != tables.num_faces()) {
    throw Error(ErrorCode::ConnectivityMismatch, "deformed cage does not match the tables' cage");
  }
}

}  // namespace

CoordinateTables compute_tables(const CageMesh& cage, std::span<const Vec3> points) {
  const long n = static_cast<long>(points.size());
  const long nv = static_cast<long>(cage.num_vertices());
  const long nf = static_cast<long>(cage.num_faces());
  const double diag = cage.bbox_diagonal();

  // 0 = ok, 1 = near boundary, 2 = outside.
  std::vector<int> status(points.size(), 0);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    if (distance_to_mesh(cage.vertices, cage.faces, points[i]) < 1e-6 * diag) {
      status[i] = 1;
    } else if (winding_number(cage.vertices, cage.faces, points[i]) < 0.5) {
      status[i] = 2;
    }
  }
  for (long i = 0; i < n; ++i) {
    if (status[i] == 1) throw Error(ErrorCode::NearBoundary, "point too close to the cage surface", i);
    if (status[i] == 2) throw Error(ErrorCode::PointOutsideCage, "point lies outside the cage", i);
  }

  CoordinateTables t;
  t.rest_points.assign(points.begin(), points.end());
  t.phi = MatX::Zero(n, nv);
  t.psi = MatX::Zero(n, nf);
  for (int k = 0; k < 3; ++k) {
    t.grad_phi[k] = MatX::Zero(n, nv);
    t.grad_psi[k] = MatX::Zero(n, nf);
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    for (long f = 0; f < nf; ++f) {
      const Face& face = cage.faces[f];
      const TriangleIntegrals ti =
          triangle_integrals(points[i], cage.vertices[face[0]], cage.vertices[face[1]], cage.vertices[face[2]]);
      t.psi(i, f) = kInv4Pi * ti.single;
      for (int k = 0; k < 3; ++k) t.grad_psi[k](i, f) = kInv4Pi * ti.grad_single[k];
      for (int c = 0; c < 3; ++c) {
        t.phi(i, face[c]) += kInv4Pi * ti.dbl[c];
        for (int k = 0; k < 3; ++k) t.grad_phi[k](i, face[c]) += kInv4Pi * ti.grad_dbl[c][k];
      }
    }
  }
  return t;
}

MatX vertex_matrix(const DeformedCage& cage) {
  MatX a(static_cast<long>(cage.vertices.size()), 3);
  for (std::size_t v = 0; v < cage.vertices.size(); ++v) a.row(static_cast<long>(v)) = cage.vertices[v].transpose();
  return a;
}

MatX face_vector_matrix(const DeformedCage& cage) {
  MatX b(static_cast<long>(cage.face_vectors.size()), 3);
  for (std::size_t f = 0; f < cage.face_vectors.size(); ++f) {
    b.row(static_cast<long>(f)) = cage.face_vectors[f].transpose();
  }
  return b;
}

std::vector<Vec3> evaluate_map(const CoordinateTables& tables, const DeformedCage& cage) {
  check_connectivity(tables, cage);
  const MatX mu = tables.phi * vertex_matrix(cage) + tables.psi * face_vector_matrix(cage);
  std::vector<Vec3> out(tables.num_points());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mu.row(static_cast<long>(i)).transpose();
  return out;
}

std::vector<Mat3> evaluate_jacobian(const CoordinateTables& tables, const DeformedCage& cage) {
  check_connectivity(tables, cage);
  const MatX a = vertex_matrix(cage), b = face_vector_matrix(cage);
  std::vector<Mat3> out(tables.num_points());
  for (int k = 0; k < 3; ++k) {
    const MatX col = tables.grad_phi[k] * a + tables.grad_psi[k] * b;  // column k of every J
    for (std::size_t i = 0; i < out.size(); ++i) out[i].col(k) = col.row(static_cast<long>(i)).transpose();
  }
  return out;
}

double face_stretch(const Vec3& u, const Vec3& v, const Vec3& ud, const Vec3& vd) {
  const double area = 0.5 * u.cross(v).norm();
  const double q = ud.squaredNorm() * v.squaredNorm() - 2.0 * ud.dot(vd) * u.dot(v) + vd.squaredNorm() * u.squaredNorm();
  return std::sqrt(std::max(q, 0.0)) / (std::sqrt(8.0) * area);
}

std::vector<Vec3> scaled_normals(const CageMesh& rest, std::span<const Vec3> deformed) {
  std::vector<Vec3> out(rest.num_faces());
  for (std::size_t f = 0; f < rest.num_faces(); ++f) {
    const Face& t = rest.faces[f];
    const Vec3 u = rest.vertices[t[1]] - rest.vertices[t[0]], v = rest.vertices[t[2]] - rest.vertices[t[0]];
    const Vec3 ud = deformed[t[1]] - deformed[t[0]], vd = deformed[t[2]] - deformed[t[0]];
    const Vec3 c = ud.cross(vd);
    out[f] = face_stretch(u, v, ud, vd) * c / c.norm();
  }
  return out;
}

std::vector<Vec3> scaled_normals_adjoint(const CageMesh& rest, std::span<const Vec3> deformed,
                                         std::span<const Vec3> grad_face_vectors) {
  std::vector<Vec3> grad(deformed.size(), Vec3::Zero());
  for (std::size_t f = 0; f < rest.num_faces(); ++f) {
    const Face& t = rest.faces[f];
    const Vec3& g = grad_face_vectors[f];
    const Vec3 u = rest.vertices[t[1]] - rest.vertices[t[0]], v = rest.vertices[t[2]] - rest.vertices[t[0]];
    const Vec3 ud = deformed[t[1]] - deformed[t[0]], vd = deformed[t[2]] - deformed[t[0]];
    const Vec3 c = ud.cross(vd);
    const double clen = c.norm();
    const Vec3 nhat = c / clen;
    const double area = 0.5 * u.cross(v).norm();
    const double q = ud.squaredNorm() * v.squaredNorm() - 2.0 * ud.dot(vd) * u.dot(v) + vd.squaredNorm() * u.squaredNorm();
    const double sq = std::sqrt(q);
    const double sigma = sq / (std::sqrt(8.0) * area);

    // sigma part
    const double ds = g.dot(nhat) / (2.0 * sq * std::sqrt(8.0) * area);
    Vec3 gu = ds * (2.0 * ud * v.squaredNorm() - 2.0 * vd * u.dot(v));
    Vec3 gv = ds * (2.0 * vd * u.squaredNorm() - 2.0 * ud * u.dot(v));
    // unit normal part
    const Vec3 w = sigma * (g - nhat * nhat.dot(g)) / clen;
    gu += vd.cross(w);
    gv += w.cross(ud);
    grad[t[1]] += gu;
    grad[t[2]] += gv;
    grad[t[0]] -= gu + gv;
  }
  return grad;
}

DeformedCage deformed_from_vertices(const CageMesh& rest, std::vector<Vec3> deformed) {
  DeformedCage out;
  out.face_vectors = scaled_normals(rest, deformed);
  out.vertices = std::move(deformed);
  return out;
}

std::string tables_key(const CageMesh& cage, std::span<const Vec3> points) {
  Sha256 h;
  h.update("splatcage-tables-v1");
  const std::uint64_t counts[3] = {cage.num_vertices(), cage.num_faces(), points.size()};
  h.update_pod(std::span<const std::uint64_t>(counts, 3));
  for (const auto& v : cage.vertices) h.update_pod(std::span<const double>(v.data(), 3));
  h.update_pod(std::span<const Face>(cage.faces));
  for (const auto& p : points) h.update_pod(std::span<const double>(p.data(), 3));
  return h.hex();
}

namespace {

constexpr char kMagic[8] = {'S', 'C', 'G', 'T', 'A', 'B', '0', '1'};

void write_block(std::ofstream& out, const MatX& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = m;
  out.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size() * sizeof(double)));
}

bool read_block(std::ifstream& in, MatX& m, long rows, long cols) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r(rows, cols);
  in.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(r.size() * sizeof(double)));
  m = r;
  return static_cast<bool>(in);
}

}  // namespace

void save_tables(const CoordinateTables& tables, const std::string& key, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t key_len = key.size();
  out.write(reinterpret_cast<const char*>(&key_len), sizeof(key_len));
  out.write(key.data(), static_cast<std::streamsize>(key.size()));
  const std::uint64_t dims[3] = {tables.num_points(), tables.num_vertices(), tables.num_faces()};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  MatX pts(static_cast<long>(tables.rest_points.size()), 3);
  for (std::size_t i = 0; i < tables.rest_points.size(); ++i) pts.row(static_cast<long>(i)) = tables.rest_points[i];
  write_block(out, pts);
  write_block(out, tables.phi);
  write_block(out, tables.psi);
  for (const auto& g : tables.grad_phi) write_block(out, g);
  for (const auto& g : tables.grad_psi) write_block(out, g);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::optional<CoordinateTables> load_tables(const std::string& key, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
  std::uint64_t key_len = 0;
  in.read(reinterpret_cast<char*>(&key_len), sizeof(key_len));
  if (!in || key_len != key.size()) return std::nullopt;
  std::string stored(key_len, '\0');
  in.read(stored.data(), static_cast<std::streamsize>(key_len));
  if (!in || stored != key) return std::nullopt;
  std::uint64_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in) return std::nullopt;
  const long n = static_cast<long>(dims[0]), nv = static_cast<long>(dims[1]), nf = static_cast<long>(dims[2]);
  CoordinateTables t;
  MatX pts;
  bool ok = read_block(in, pts, n, 3) && read_block(in, t.phi, n, nv) && read_block(in, t.psi, n, nf);
  for (auto& g : t.grad_phi) ok = ok && read_block(in, g, n, nv);
  for (auto& g : t.grad_psi) ok = ok && read_block(in, g, n, nf);
  if (!ok) return std::nullopt;
  t.rest_points.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) t.rest_points[static_cast<std::size_t>(i)] = pts.row(i).transpose();
  return t;
}

CoordinateTables compute_tables_cached(const CageMesh& cage, std::span<const Vec3> points,
                                       const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return compute_tables(cage, points);
  const std::string key = tables_key(cage, points);
  const auto path = cache_dir / (key + ".gct");
  if (auto cached = load_tables(key, path)) return std::move(*cached);
  CoordinateTables t = compute_tables(cage, points);
  std::filesystem::create_directories(cache_dir);
  save_tables(t, key, path);
  return t;
}

}  // namespace splatcage
