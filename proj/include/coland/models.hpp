#pragma once

#include <Eigen/Dense>

#include "coland/dual.hpp"

namespace coland {

inline constexpr int kQuadNx = 12;  // p(3), euler(3), v(3), omega_body(3)
inline constexpr int kQuadNu = 4;   // rotor thrusts
inline constexpr int kOmniNx = 4;   // p(2), v(2)
inline constexpr int kOmniNu = 2;   // force magnitude, force direction
inline constexpr int kReducedNx = 6;  // p(3), v(3)
inline constexpr int kReducedNu = 4;  // total thrust, commanded euler(3)

struct QuadParams {
  double mass = 0.0371;                                // kg
  Eigen::Vector3d inertia{1.43e-5, 1.43e-5, 2.89e-5};  // kg m^2, diagonal
  double arm_length = 0.092;                           // m
  double torque_coeff = 0.005964;                      // m
  double gravity = 9.81;                               // m/s^2

  double hover_thrust_per_rotor() const { return 0.25 * mass * gravity; }
};

struct OmniParams {
  double mass = 3.2;      // kg
  double z_omni = 0.157;  // landing platform height, m
};

/// Quadrotor rigid-body dynamics on raw arrays, templated for AD.
/// State: [px py pz, phi theta psi, vx vy vz, wx wy wz] (omega in body frame).
/// Input: four rotor thrusts [f1 f2 f3 f4].
template <typename T>
void quad_dynamics_core(const T* x, const T* u, const QuadParams& p, T* out) {
  const T& phi = x[3];
  const T& theta = x[4];
  const T& psi = x[5];
  const T* v = x + 6;
  const T* w = x + 9;

  T cphi = cos(phi), sphi = sin(phi);
  T cth = cos(theta), sth = sin(theta);
  T cpsi = cos(psi), spsi = sin(psi);
  T tth = sth / cth;

  T f_total = u[0] + u[1] + u[2] + u[3];
  const double arm = 0.25 * std::sqrt(2.0) * p.arm_length;
  T tau_x = arm * (u[1] + u[2] - u[0] - u[3]);
  T tau_y = arm * (u[1] + u[3] - u[0] - u[2]);
  T tau_z = p.torque_coeff * (u[2] + u[3] - u[0] - u[1]);

  out[0] = v[0];
  out[1] = v[1];
  out[2] = v[2];

  out[3] = w[0] + sphi * tth * w[1] + cphi * tth * w[2];
  out[4] = cphi * w[1] - sphi * w[2];
  out[5] = (sphi * w[1] + cphi * w[2]) / cth;

  // Body z axis in world frame for ZYX euler angles.
  T r13 = cpsi * sth * cphi + spsi * sphi;
  T r23 = spsi * sth * cphi - cpsi * sphi;
  T r33 = cth * cphi;
  out[6] = r13 * f_total / p.mass;
  out[7] = r23 * f_total / p.mass;
  out[8] = r33 * f_total / p.mass - p.gravity;

  const double jx = p.inertia[0], jy = p.inertia[1], jz = p.inertia[2];
  out[9] = (tau_x - (jz - jy) * w[1] * w[2]) / jx;
  out[10] = (tau_y - (jx - jz) * w[2] * w[0]) / jy;
  out[11] = (tau_z - (jy - jx) * w[0] * w[1]) / jz;
}

/// Omnidirectional ground robot, planar point mass steered by a thrust
/// vector of magnitude u[0] at heading u[1].
/// State: [px py vx vy].
template <typename T>
void omni_dynamics_core(const T* x, const T* u, const OmniParams& p, T* out) {
  out[0] = x[2];
  out[1] = x[3];
  out[2] = u[0] * cos(u[1]) / p.mass;
  out[3] = u[0] * sin(u[1]) / p.mass;
}

/// Point-mass quadrotor model for tracking: attitude treated as an input.
/// State: [px py pz vx vy vz], input: [f_total, phi, theta, psi].
template <typename T>
void reduced_quad_core(const T* x, const T* u, const QuadParams& p, T* out) {
  const T& f = u[0];
  const T& phi = u[1];
  const T& theta = u[2];
  const T& psi = u[3];
  T cphi = cos(phi), sphi = sin(phi);
  T cth = cos(theta), sth = sin(theta);
  T cpsi = cos(psi), spsi = sin(psi);
  out[0] = x[3];
  out[1] = x[4];
  out[2] = x[5];
  out[3] = (cpsi * sth * cphi + spsi * sphi) * f / p.mass;
  out[4] = (spsi * sth * cphi - cpsi * sphi) * f / p.mass;
  out[5] = cth * cphi * f / p.mass - p.gravity;
}

/// Kinematic ground-robot model for tracking: velocity is the input.
/// State: [px py], input: [vx vy].
template <typename T>
void omni_kinematic_core(const T* x, const T* u, T* out) {
  (void)x;
  out[0] = u[0];
  out[1] = u[1];
}

using QuadState = Eigen::Matrix<double, kQuadNx, 1>;
using QuadInput = Eigen::Matrix<double, kQuadNu, 1>;
using OmniState = Eigen::Matrix<double, kOmniNx, 1>;
using OmniInput = Eigen::Matrix<double, kOmniNu, 1>;

/// World-from-body rotation for ZYX euler angles (phi, theta, psi).
Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& euler);

/// Maps body rates to euler-angle rates. Throws std::domain_error at the
/// theta = +-pi/2 singularity.
Eigen::Matrix3d euler_rate_matrix(const Eigen::Vector3d& euler);

/// Body torque produced by the four rotor thrusts.
Eigen::Vector3d quad_torque(const QuadInput& u, const QuadParams& p);

QuadState quad_dynamics(const QuadState& x, const QuadInput& u,
                        const QuadParams& p);
OmniState omni_dynamics(const OmniState& x, const OmniInput& u,
                        const OmniParams& p);

}  // namespace coland
