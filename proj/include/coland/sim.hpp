#pragma once

#include <string>
#include <vector>

#include "coland/planner.hpp"
#include "coland/tracker.hpp"

namespace coland {

enum class DisturbanceKind { kNone, kImpulse, kConstantWind };

/// External force applied to the quadrotor in the world frame, active on
/// [window_start, window_end). An impulse is a large force over a few
/// milliseconds; wind is a moderate force over a longer window.
struct Disturbance {
  DisturbanceKind kind = DisturbanceKind::kNone;
  Eigen::Vector3d force = Eigen::Vector3d::Zero();  // N
  double window_start = 0.0;
  double window_end = 0.0;

  bool active(double t) const {
    return kind != DisturbanceKind::kNone && t >= window_start &&
           t < window_end;
  }

  /// Lateral gust strong enough to momentarily out-muscle the tracker's
  /// tilt authority, so the 0.1 m replanning threshold is actually crossed
  /// while landing remains achievable once the gust passes.
  static Disturbance wind();
  /// Short hard shove, roughly a 0.5 m/s lateral velocity kick.
  static Disturbance impulse();
};

struct LandingCriteria {
  double platform_radius = 0.15;     // m, horizontal offset, inclusive
  double vertical_tolerance = 0.05;  // m, |quad z - platform z|
  double max_descent_speed = 0.5;    // m/s at touchdown
};

struct SimConfig {
  double plant_step = 0.001;   // s, must divide both tracker periods
  double duration_cap = 10.0;  // s, hard stop
  double run_past_plan = 0.5;  // s simulated beyond the active plan's end
  Disturbance disturbance;
  bool replan_enabled = false;
  double replan_threshold = 0.1;  // m of quad position error
  LandingCriteria criteria;
};

struct SimSample {
  double t = 0.0;
  QuadState x_q = QuadState::Zero();
  OmniState x_omni = OmniState::Zero();
  QuadInput rotor = QuadInput::Zero();              // allocated rotor forces
  Eigen::Vector4d cmd_q = Eigen::Vector4d::Zero();  // thrust, attitude cmd
  Eigen::Vector2d cmd_omni = Eigen::Vector2d::Zero();  // velocity cmd
  Eigen::Matrix<double, kReducedNx, 1> ref_q =
      Eigen::Matrix<double, kReducedNx, 1>::Zero();
  Eigen::Vector2d ref_omni = Eigen::Vector2d::Zero();
  double err_q = 0.0;  // quad position error against the reference, m
  double err_omni = 0.0;
  bool quad_tick = false;  // tracker invoked at this step
  bool omni_tick = false;
  bool quad_degraded = false;  // last tracker solve fell back to reference
  bool omni_degraded = false;
  SolveStatus quad_status = SolveStatus::kConverged;  // last solve outcome
  SolveStatus omni_status = SolveStatus::kConverged;
};

struct ReplanEvent {
  double t = 0.0;
  double error = 0.0;  // trigger error, m
  double wall = 0.0;   // replan solve time, s
  int iterations = 0;
  bool accepted = false;  // new plan passed the invariants and was adopted
  std::string message;    // planner diagnostic when rejected
};

struct LandingVerdict {
  bool success = false;
  double touchdown_time = -1.0;
  double horizontal_offset = kInf;  // at touchdown, m
  double vertical_gap = kInf;       // quad z - platform z at touchdown, m
  double descent_speed = kInf;      // -vz at touchdown, m/s
};

/// Complete record of one closed-loop run. Samples are uniform at the
/// plant rate; wall-time fields are diagnostics and are the only entries
/// not reproduced bit-exactly between identical runs.
struct SimLog {
  std::vector<SimSample> samples;
  std::vector<ReplanEvent> replans;
  std::vector<double> quad_mpc_walls, omni_mpc_walls;  // s per invocation
  double plan_wall = 0.0;  // initial planning solve, s
  LandingPlan plan;        // active (most recent) plan
  double z_platform = 0.0;
  bool diverged = false;
  std::string message;  // why the run ended early, when it did
  LandingVerdict verdict;
};

/// One 12-state plant step: RK4 over the full rigid-body dynamics plus an
/// external world-frame force on the center of mass.
QuadState quad_plant_step(const QuadState& x, const QuadInput& u,
                          const Eigen::Vector3d& external_force,
                          const QuadParams& params, double dt);

OmniState omni_plant_step(const OmniState& x, const OmniInput& u,
                          const OmniParams& params, double dt);

/// Thrust-plus-torque demand mapped to four rotor forces through the rig's
/// (invertible) mixer matrix, then clamped into the rotor bounds.
QuadInput allocate_rotors(double f_total, const Eigen::Vector3d& torque,
                          const QuadParams& params,
                          const Eigen::Vector4d& lower,
                          const Eigen::Vector4d& upper);

/// Plans, then simulates both plants at the plant rate with the quad
/// tracker every 10 steps and the omni tracker every 100 (at default
/// rates). The quad's attitude command runs through an inner PD loop and
/// rotor allocation; the omni velocity command through a force-bounded
/// proportional velocity loop. Replanning, when enabled, triggers at quad
/// tracker instants once the position error exceeds the threshold.
/// Non-finite plant states abort the run with a partial log.
SimLog run_closed_loop(const ScenarioConfig& scenario, const SimConfig& sim);

/// Scans the log for the first sample meeting all three touchdown
/// criteria: horizontal offset at most the platform radius (inclusive),
/// |vertical gap| within tolerance (two-sided, so flying underneath the
/// platform does not count), and descent speed at most the limit.
LandingVerdict evaluate_landing(const SimLog& log,
                                const LandingCriteria& criteria);

}  // namespace coland
