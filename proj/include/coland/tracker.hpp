#pragma once

#include <Eigen/Dense>

#include "coland/nlp.hpp"
#include "coland/planner.hpp"

namespace coland {

/// Plan values resampled onto a query time. States interpolate linearly
/// between knots, inputs are zero-order held. Queries past the last knot
/// return the terminal state with quasi-static inputs (hover thrust with
/// level attitude for the quadrotor, zero velocity for the ground robot).
struct ReferenceSample {
  Eigen::Matrix<double, kReducedNx, 1> quad_state;  // position, velocity
  Eigen::Matrix<double, kReducedNu, 1> quad_input;  // total thrust, euler cmd
  Eigen::Vector2d omni_pos;
  Eigen::Vector2d omni_vel;  // doubles as the kinematic input reference
};

ReferenceSample sample_reference(const LandingPlan& plan, double t,
                                 double hover_total_thrust);

enum class TrackerModel { kReducedQuad, kOmniKinematic };

/// Tracking MPC configuration. Weights are diagonals sized to the model:
/// reduced quadrotor (6 states, 4 inputs) or kinematic ground robot
/// (2 states, 2 inputs, velocity acting as the input).
struct TrackerConfig {
  TrackerModel model = TrackerModel::kReducedQuad;
  int horizon = 20;
  double rate = 100.0;  // Hz
  Eigen::VectorXd q, r, p;
  Eigen::VectorXd x_lower, x_upper, u_lower, u_upper;

  static TrackerConfig quad_defaults(const QuadParams& quad,
                                     const OcpBounds& bounds);
  static TrackerConfig omni_defaults(const OcpBounds& bounds);
};

struct MpcResult {
  Eigen::VectorXd u;       // first input, always within bounds
  bool degraded = false;   // solver failed; u is the clamped reference input
  double cost = 0.0;       // optimal objective value
  Eigen::MatrixXd x_pred;  // predicted states, nx x (H+1)
  Eigen::MatrixXd u_seq;   // planned inputs, nu x H
  SolveStatus status = SolveStatus::kEvalError;
  int iterations = 0;
};

/// One receding-horizon tracker. Owns its warm-start memory, so keep one
/// instance per robot and call mpc_step at the configured rate.
class Tracker {
 public:
  Tracker(TrackerConfig config, const QuadParams& quad);

  /// Solves the tracking problem from the (soft-clamped) current state at
  /// plan time t and returns the first input. On solver failure the
  /// reference input is returned instead with the degraded flag set.
  MpcResult mpc_step(const Eigen::VectorXd& x_now, const LandingPlan& plan,
                     double t);

  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  QuadParams quad_;
  WarmStartData warm_;
  double warm_mu_ = 1e-2;
  bool has_warm_ = false;
};

}  // namespace coland
