#pragma once

#include <Eigen/Core>

namespace skelcast {

// Axis-angle (exponential map) 3-vector to rotation matrix. The norm is
// the rotation angle in radians; below 1e-8 the closed form is replaced
// by its second-order series to avoid dividing by a near-zero norm.
Eigen::Matrix3d expmap_to_rotmat(const Eigen::Vector3d& v);

// Intrinsic Z-Y-X Euler angles (alpha, beta, gamma) such that
// Rz(alpha) * Ry(beta) * Rx(gamma) reproduces R. Near gimbal lock
// (|R(2,0)| > 1 - 1e-7) the degenerate branch fixes gamma = 0.
// Throws std::invalid_argument if R is not a proper rotation within 1e-6.
Eigen::Vector3d rotmat_to_euler(const Eigen::Matrix3d& r);

// Composes Rz(alpha) * Ry(beta) * Rx(gamma).
Eigen::Matrix3d euler_to_rotmat(const Eigen::Vector3d& angles);

}  // namespace skelcast
