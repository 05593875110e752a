#include "coland/models.hpp"

#include <cmath>
#include <stdexcept>

namespace coland {

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler) {
  const double cphi = std::cos(euler[0]), sphi = std::sin(euler[0]);
  const double cth = std::cos(euler[1]), sth = std::sin(euler[1]);
  const double cpsi = std::cos(euler[2]), spsi = std::sin(euler[2]);
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, cphi, -sphi, 0, sphi, cphi;
  ry << cth, 0, sth, 0, 1, 0, -sth, 0, cth;
  rz << cpsi, -spsi, 0, spsi, cpsi, 0, 0, 0, 1;
  return rz * ry * rx;
}

Eigen::Matrix3d euler_rate_matrix(const Eigen::Vector3d& euler) {
  const double cphi = std::cos(euler[0]), sphi = std::sin(euler[0]);
  const double cth = std::cos(euler[1]), sth = std::sin(euler[1]);
  if (std::abs(cth) < 1e-9) {
    throw std::domain_error("euler_rate_matrix: theta at +-pi/2 singularity");
  }
  const double tth = sth / cth;
  Eigen::Matrix3d t;
  t << 1, sphi * tth, cphi * tth,  //
      0, cphi, -sphi,              //
      0, sphi / cth, cphi / cth;
  return t;
}

Eigen::Vector3d quad_torque(const QuadInput& u, const QuadParams& p) {
  const double arm = 0.25 * std::sqrt(2.0) * p.arm_length;
  return {arm * (u[1] + u[2] - u[0] - u[3]),
          arm * (u[1] + u[3] - u[0] - u[2]),
          p.torque_coeff * (u[2] + u[3] - u[0] - u[1])};
}

QuadState quad_dynamics(const QuadState& x, const QuadInput& u,
                        const QuadParams& p) {
  if (std::abs(std::cos(x[4])) < 1e-9) {
    throw std::domain_error("quad_dynamics: theta at +-pi/2 singularity");
  }
  QuadState dx;
  quad_dynamics_core(x.data(), u.data(), p, dx.data());
  return dx;
}

OmniState omni_dynamics(const OmniState& x, const OmniInput& u,
                        const OmniParams& p) {
  OmniState dx;
  omni_dynamics_core(x.data(), u.data(), p, dx.data());
  return dx;
}

}  // namespace coland
