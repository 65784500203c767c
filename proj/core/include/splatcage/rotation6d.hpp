#pragma once

#include "splatcage/types.hpp"

namespace splatcage {

/// Column Gram-Schmidt of the two stacked 3-vectors (a1, a2):
/// b1 = a1/|a1|, b2 = normalized a2 minus its b1 part, b3 = b1 x b2, R = [b1 b2 b3].
/// Throws DegenerateRotation when a1 vanishes or a2 is parallel to a1 (1e-8).
Mat3 rotation_from_6d(const Vec6& a);

/// dL/da given dL/dR.
Vec6 rotation_from_6d_adjoint(const Vec6& a, const Mat3& grad_r);

/// First two columns of R, the canonical 6D code of a rotation.
Vec6 rotation_to_6d(const Mat3& r);

/// Symmetric matrix from (xx, yy, zz, xy, xz, yz).
Mat3 stretch_from_6d(const Vec6& s);
Vec6 stretch_to_6d(const Mat3& s);

/// dL/ds given dL/dS; off-diagonal entries collect both mirrored slots.
Vec6 stretch_from_6d_adjoint(const Mat3& grad_s);

inline Vec6 identity_rot6() { return (Vec6() << 1, 0, 0, 0, 1, 0).finished(); }
inline Vec6 identity_stretch6() { return (Vec6() << 1, 1, 1, 0, 0, 0).finished(); }

}  // namespace splatcage
