#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "splatcage/cage.hpp"
#include "splatcage/types.hpp"

namespace splatcage {

/// Per-face rotation (6D code) and free symmetric stretch. `translation`
/// moves the solved cage as a whole; per-face Jacobians cannot express it.
struct JacobianParams {
  std::vector<Vec6> rot6;
  std::vector<Vec6> stretch6;
  Vec3 translation = Vec3::Zero();

  static JacobianParams identity(std::size_t num_faces);
  std::size_t num_faces() const { return rot6.size(); }
};

/// T_t = R(rot6_t) * S(stretch6_t).
std::vector<Mat3> params_to_transforms(const JacobianParams& params);

/// Gradient with respect to rot6/stretch6 given dL/dT_t; translation left zero.
JacobianParams params_to_transforms_adjoint(const JacobianParams& params, std::span<const Mat3> grad_transforms);

/// Polar split T = R S (R proper rotation, S symmetric; S picks up the sign
/// when det T < 0). Inverse of params_to_transforms up to the 6D gauge.
JacobianParams params_from_transforms(std::span<const Mat3> transforms, const Vec3& translation = Vec3::Zero());

using SparseMat = Eigen::SparseMatrix<double>;

/// Least-squares integration of per-face target Jacobians into a cage.
///
/// Unknowns are the V vertex positions followed by one vector b_t per face.
/// A face Jacobian is J_t = [e1' e2' b_t] [e1 e2 n_t]^-1 with e1, e2 the edges
/// from corner 0 and n_t the rest unit normal, so the rest cage (b_t = n_t)
/// has J_t = I and every global linear map is reproduced exactly.
class PoissonSystem {
 public:
  explicit PoissonSystem(const CageMesh& cage);

  const CageMesh& cage() const { return cage_; }
  std::size_t num_vertices() const { return cage_.num_vertices(); }
  std::size_t num_faces() const { return cage_.num_faces(); }
  std::size_t num_unknowns() const { return num_vertices() + num_faces(); }

  /// 3F x (V+F); rows 3t..3t+2 give row r of J_t from coordinate r of the unknowns.
  const SparseMat& grad_op() const { return grad_; }
  const VecX& face_area_weights() const { return area_; }
  const std::vector<Mat3>& rest_jacobians() const { return rest_jacobians_; }

  /// Achieved Jacobians of a deformed cage.
  std::vector<Mat3> jacobians(const DeformedCage& cage) const;

  /// Solves (G^T W G) x = rhs with the first vertex pinned to zero.
  /// rhs and the result have num_unknowns() entries.
  VecX solve_pinned(const VecX& rhs) const;

  /// Gradient of sum_t A_t |J_t - target_t|_F^2 / 2 wrt each coordinate of
  /// the unknowns, stacked (num_unknowns x 3). Zero at a solve_cage result.
  MatX normal_residual(const DeformedCage& cage, std::span<const Mat3> targets) const;

 private:
  CageMesh cage_;
  SparseMat grad_;
  VecX area_;
  std::vector<Mat3> rest_jacobians_;
  Eigen::SimplicialLDLT<SparseMat> ldlt_;
};

/// Throws SingularSystem for a cage with more than one connected component.
PoissonSystem build_poisson(const CageMesh& cage);

/// Minimizes sum_t A_t |J_t - T_t J0_t|_F^2; the vertex mean lands on the
/// rest mean plus `translation`.
DeformedCage solve_cage(const PoissonSystem& system, std::span<const Mat3> transforms,
                        const Vec3& translation = Vec3::Zero());

struct CageGradient {
  std::vector<Mat3> transforms;
  Vec3 translation = Vec3::Zero();
};

/// Reverse mode of solve_cage. Upstream gradients on face vectors may be empty.
CageGradient solve_cage_adjoint(const PoissonSystem& system, std::span<const Vec3> grad_vertices,
                                std::span<const Vec3> grad_face_vectors = {});

void save_params(const JacobianParams& params, const std::filesystem::path& path);
JacobianParams load_params(const std::filesystem::path& path);

}  // namespace splatcage
