#include "skelcast/rotations.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skelcast {
namespace {

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& v) {
  Eigen::Matrix3d k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return k;
}

}  // namespace

Eigen::Matrix3d expmap_to_rotmat(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  if (theta < 1e-8) {
    // R ~ I + [v]x + 0.5 [v]x^2
    const Eigen::Matrix3d k = cross_matrix(v);
    return Eigen::Matrix3d::Identity() + k + 0.5 * (k * k);
  }
  const Eigen::Matrix3d k = cross_matrix(v / theta);
  return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

Eigen::Vector3d rotmat_to_euler(const Eigen::Matrix3d& r) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || r.determinant() < 0.0)
    throw std::invalid_argument("rotmat_to_euler: input is not a proper rotation matrix");

  // R = Rz(a) Ry(b) Rx(g); R(2,0) = -sin(b)
  const double s = -r(2, 0);
  if (std::abs(r(2, 0)) > 1.0 - 1e-7) {
    // Gimbal lock: only a - g is determined; fix g = 0.
    const double beta = s >= 0.0 ? M_PI / 2.0 : -M_PI / 2.0;
    const double alpha = std::atan2(-r(0, 1), r(1, 1));
    return {alpha, beta, 0.0};
  }
  const double beta = std::asin(std::clamp(s, -1.0, 1.0));
  const double alpha = std::atan2(r(1, 0), r(0, 0));
  const double gamma = std::atan2(r(2, 1), r(2, 2));
  return {alpha, beta, gamma};
}

Eigen::Matrix3d euler_to_rotmat(const Eigen::Vector3d& angles) {
  const double ca = std::cos(angles.x()), sa = std::sin(angles.x());
  const double cb = std::cos(angles.y()), sb = std::sin(angles.y());
  const double cg = std::cos(angles.z()), sg = std::sin(angles.z());
  Eigen::Matrix3d rz, ry, rx;
  rz << ca, -sa, 0, sa, ca, 0, 0, 0, 1;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rx << 1, 0, 0, 0, cg, -sg, 0, sg, cg;
  return rz * ry * rx;
}

}  // namespace skelcast
