#include "coland/sim.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "coland/integrate.hpp"

namespace coland {
namespace {

// Inner-loop gains: attitude PD at about 25 rad/s (the plant integrates at
// 1 kHz, so this is comfortably resolved) and a 0.125 s velocity loop for
// the ground robot.
constexpr double kAttKp = 625.0;
constexpr double kAttKd = 45.0;
constexpr double kVelKp = 25.0;

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Eigen::Vector3d attitude_pd(const QuadState& x, const Eigen::Vector3d& xi_cmd,
                            const QuadParams& p) {
  Eigen::Vector3d e = xi_cmd - x.segment<3>(3);
  e[2] = wrap_angle(e[2]);
  const Eigen::Vector3d omega = x.segment<3>(9);
  const Eigen::Vector3d j = p.inertia;
  return j.cwiseProduct(kAttKp * e - kAttKd * omega) +
         omega.cross(j.cwiseProduct(omega));
}

OmniInput omni_velocity_loop(const Eigen::Vector2d& v_cmd, const OmniState& x,
                             const OmniParams& params, double f_max) {
  const Eigen::Vector2d f = params.mass * kVelKp * (v_cmd - x.tail<2>());
  OmniInput u = OmniInput::Zero();
  const double mag = f.norm();
  if (mag > 1e-12) {
    u[0] = std::min(mag, f_max);
    u[1] = std::atan2(f[1], f[0]);
  }
  return u;
}

}  // namespace

Disturbance Disturbance::wind() {
  Disturbance d;
  d.kind = DisturbanceKind::kConstantWind;
  d.force = Eigen::Vector3d(0.0, 0.25, 0.0);
  d.window_start = 0.6;
  d.window_end = 1.2;
  return d;
}

Disturbance Disturbance::impulse() {
  Disturbance d;
  d.kind = DisturbanceKind::kImpulse;
  d.force = Eigen::Vector3d(0.37, 0.0, 0.0);
  d.window_start = 0.8;
  d.window_end = 0.85;
  return d;
}

QuadState quad_plant_step(const QuadState& x, const QuadInput& u,
                          const Eigen::Vector3d& external_force,
                          const QuadParams& params, double dt) {
  auto dyn = [&](const Eigen::VectorXd& s, const Eigen::VectorXd& in) {
    Eigen::VectorXd dx(kQuadNx);
    quad_dynamics_core(s.data(), in.data(), params, dx.data());
    dx.segment<3>(6) += external_force / params.mass;
    return dx;
  };
  return rk4_step(dyn, x, u, dt);
}

OmniState omni_plant_step(const OmniState& x, const OmniInput& u,
                          const OmniParams& params, double dt) {
  auto dyn = [&](const Eigen::VectorXd& s, const Eigen::VectorXd& in) {
    Eigen::VectorXd dx(kOmniNx);
    omni_dynamics_core(s.data(), in.data(), params, dx.data());
    return dx;
  };
  return rk4_step(dyn, x, u, dt);
}

QuadInput allocate_rotors(double f_total, const Eigen::Vector3d& torque,
                          const QuadParams& params,
                          const Eigen::Vector4d& lower,
                          const Eigen::Vector4d& upper) {
  const double arm = 0.25 * std::sqrt(2.0) * params.arm_length;
  const double c = params.torque_coeff;
  Eigen::Matrix4d mix;
  mix << 1, 1, 1, 1,                //
      -arm, arm, arm, -arm,         //
      -arm, arm, -arm, arm,         //
      -c, -c, c, c;
  Eigen::Vector4d rhs;
  rhs << f_total, torque;
  // The mixer is square and invertible, so the least-squares fit is exact;
  // the box clamp afterwards sheds whatever the rotors cannot deliver.
  QuadInput f = mix.inverse() * rhs;
  return f.cwiseMax(lower).cwiseMin(upper);
}

LandingVerdict evaluate_landing(const SimLog& log,
                                const LandingCriteria& criteria) {
  LandingVerdict v;
  for (const SimSample& s : log.samples) {
    const Eigen::Vector2d offset =
        s.x_q.head<2>() - s.x_omni.head<2>();
    const double horizontal = offset.norm();
    const double gap = s.x_q[2] - log.z_platform;
    const double descent = -s.x_q[8];
    if (horizontal <= criteria.platform_radius &&
        std::abs(gap) <= criteria.vertical_tolerance &&
        descent <= criteria.max_descent_speed) {
      v.success = true;
      v.touchdown_time = s.t;
      v.horizontal_offset = horizontal;
      v.vertical_gap = gap;
      v.descent_speed = descent;
      return v;
    }
  }
  return v;
}

SimLog run_closed_loop(const ScenarioConfig& scenario, const SimConfig& sim) {
  if (!(sim.plant_step > 0.0) || !(sim.duration_cap > 0.0)) {
    throw std::invalid_argument("sim: plant step and duration must be > 0");
  }
  Tracker quad_tracker(TrackerConfig::quad_defaults(scenario.quad,
                                                    scenario.bounds),
                       scenario.quad);
  Tracker omni_tracker(TrackerConfig::omni_defaults(scenario.bounds),
                       scenario.quad);
  const auto steps_per = [&](double rate) {
    const double period = 1.0 / rate;
    const long steps = std::lround(period / sim.plant_step);
    if (steps < 1 || std::abs(steps * sim.plant_step - period) > 1e-9) {
      throw std::invalid_argument(
          "sim: plant step must divide the tracker periods");
    }
    return steps;
  };
  const long quad_every = steps_per(quad_tracker.config().rate);
  const long omni_every = steps_per(omni_tracker.config().rate);

  SimLog log;
  log.z_platform = scenario.omni.z_omni;

  const auto t_plan = std::chrono::steady_clock::now();
  log.plan = plan_landing(scenario);
  log.plan_wall = seconds_since(t_plan);
  if (!log.plan.feasible) {
    log.message = "planning failed: " + log.plan.message;
    return log;
  }

  const double dt = sim.plant_step;
  const double hover = scenario.quad.mass * scenario.quad.gravity;
  const Eigen::Vector4d rotor_lo = scenario.bounds.quad_input_lower;
  const Eigen::Vector4d rotor_hi = scenario.bounds.quad_input_upper;
  const double omni_f_max = scenario.bounds.omni_input_upper[0];

  QuadState x_q = scenario.x_q0;
  OmniState x_omni = scenario.x_omni0;
  double plan_origin = 0.0;
  auto end_step = [&]() {
    const double end =
        std::min(sim.duration_cap,
                 plan_origin + log.plan.total_time + sim.run_past_plan);
    return std::lround(end / dt);
  };

  Eigen::Vector4d cmd_q;
  cmd_q << hover, 0.0, 0.0, x_q[5];
  Eigen::Vector2d cmd_omni = Eigen::Vector2d::Zero();
  bool quad_degraded = false, omni_degraded = false;
  SolveStatus quad_status = SolveStatus::kConverged;
  SolveStatus omni_status = SolveStatus::kConverged;

  for (long k = 0;; ++k) {
    const double t = k * dt;
    SimSample s;
    s.t = t;
    s.quad_tick = k % quad_every == 0;
    s.omni_tick = k % omni_every == 0;

    if (s.quad_tick) {
      Eigen::VectorXd reduced(kReducedNx);
      reduced << x_q.head<3>(), x_q.segment<3>(6);
      const ReferenceSample at =
          sample_reference(log.plan, t - plan_origin, hover);
      const double err = (x_q.head<3>() - at.quad_state.head<3>()).norm();
      if (sim.replan_enabled && err > sim.replan_threshold) {
        const auto t0 = std::chrono::steady_clock::now();
        LandingPlan next =
            replan(scenario, x_q, x_omni, log.plan, t - plan_origin);
        ReplanEvent ev;
        ev.t = t;
        ev.error = err;
        ev.wall = seconds_since(t0);
        ev.iterations = next.report.iterations;
        ev.accepted = next.feasible;
        if (!next.feasible) ev.message = next.message;
        log.replans.push_back(ev);
        if (next.feasible) {
          log.plan = std::move(next);
          plan_origin = t;
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      MpcResult r = quad_tracker.mpc_step(reduced, log.plan, t - plan_origin);
      log.quad_mpc_walls.push_back(seconds_since(t0));
      cmd_q = r.u;
      quad_degraded = r.degraded;
      quad_status = r.status;
    }
    if (s.omni_tick) {
      const auto t0 = std::chrono::steady_clock::now();
      MpcResult r = omni_tracker.mpc_step(x_omni.head<2>(), log.plan,
                                          t - plan_origin);
      log.omni_mpc_walls.push_back(seconds_since(t0));
      cmd_omni = r.u;
      omni_degraded = r.degraded;
      omni_status = r.status;
    }

    const Eigen::Vector3d torque = attitude_pd(x_q, cmd_q.tail<3>(),
                                               scenario.quad);
    const QuadInput rotor =
        allocate_rotors(cmd_q[0], torque, scenario.quad, rotor_lo, rotor_hi);
    const OmniInput omni_u =
        omni_velocity_loop(cmd_omni, x_omni, scenario.omni, omni_f_max);

    const ReferenceSample ref =
        sample_reference(log.plan, t - plan_origin, hover);
    s.x_q = x_q;
    s.x_omni = x_omni;
    s.rotor = rotor;
    s.cmd_q = cmd_q;
    s.cmd_omni = cmd_omni;
    s.ref_q = ref.quad_state;
    s.ref_omni = ref.omni_pos;
    s.err_q = (x_q.head<3>() - ref.quad_state.head<3>()).norm();
    s.err_omni = (x_omni.head<2>() - ref.omni_pos).norm();
    s.quad_degraded = quad_degraded;
    s.omni_degraded = omni_degraded;
    s.quad_status = quad_status;
    s.omni_status = omni_status;
    log.samples.push_back(s);

    if (k >= end_step()) break;

    const Eigen::Vector3d f_ext = sim.disturbance.active(t)
                                      ? sim.disturbance.force
                                      : Eigen::Vector3d::Zero();
    x_q = quad_plant_step(x_q, rotor, f_ext, scenario.quad, dt);
    x_omni = omni_plant_step(x_omni, omni_u, scenario.omni, dt);
    if (!x_q.allFinite() || !x_omni.allFinite()) {
      log.diverged = true;
      log.message = "plant state diverged at t = " + std::to_string(t + dt);
      break;
    }
  }

  log.verdict = evaluate_landing(log, sim.criteria);
  return log;
}

}  // namespace coland
