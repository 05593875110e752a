#include "coland/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "coland/integrate.hpp"

namespace coland {
namespace {

// Continuation schedule. The approach stage keeps the coupling row wide
// (it never binds below kWideSigma) and pulls the quadrotor toward the
// platform through the quadratic penalty alone; the polish tightens the
// row to equality grade. The penalty stays on during the polish: its
// curvature regularizes the otherwise rank-deficient landing corner.
constexpr double kWideSigma = 1e3;
constexpr double kCompPenalty = 1e4;
constexpr double kApproachTol = 1e-4;
constexpr double kExactSigma = 1e-7;
constexpr double kPolishTolFloor = 1e-5;
constexpr int kPolishMaxIter = 150;
// Warm barrier ladder for the polish. No single value suits every
// geometry: a large mu re-perturbs converged multipliers, a tiny one
// freezes the iterate before the tightened coupling can move it.
constexpr double kPolishMu[] = {1e-5, 1e-4, 1e-6};

constexpr double kInvTol = 1e-6;
constexpr double kDefectTol = 1e-8;

double quad_speed_bound(const OcpBounds& b) {
  double v = 0.0;
  for (int i = 6; i < 9; ++i) {
    v = std::max({v, std::abs(b.quad_state_upper[i]),
                  std::abs(b.quad_state_lower[i])});
  }
  return v;
}

/// Checks the published plan invariants on a raw solution vector. The
/// solver's formal exit status is deliberately not consulted: near the
/// landing corner the coupling gradient vanishes and the dual certificate
/// can stall one order above the requested tolerance at a point whose
/// trajectory is fully usable. When only the re-integration check fails,
/// *defect_only is set so the caller can tighten instead of rejecting.
bool verify_plan(const Eigen::VectorXd& x, const StageLayout& L,
                 const ScenarioConfig& sc, std::string* why,
                 bool* defect_only = nullptr) {
  const int n = L.N;
  char buf[160];
  const auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  if (defect_only) *defect_only = false;

  double sum_eps = 0.0;
  for (int k = 0; k < n; ++k) sum_eps += x[L.eps(k)];
  if (std::abs(sum_eps - 1.0) > kInvTol) {
    std::snprintf(buf, sizeof buf, "landing indicator mass %.6f is off unity",
                  sum_eps);
    return fail(buf);
  }
  if (std::abs(x[L.kappa(0)] - 1.0) > kInvTol ||
      std::abs(x[L.kappa(n)]) > kInvTol) {
    return fail("progress counter endpoints are off their pins");
  }
  for (int k = 0; k < n; ++k) {
    if (x[L.kappa(k + 1)] > x[L.kappa(k)] + 1e-9) {
      return fail("progress counter increases between stages");
    }
    if (std::abs(x[L.kappa(k + 1)] - x[L.kappa(k)] + x[L.eps(k)]) > kInvTol) {
      return fail("progress recurrence violated");
    }
  }
  for (int k = 0; k <= n; ++k) {
    const double dt = x[L.dt(k)];
    if (dt < sc.bounds.dt_min - 1e-9 || dt > sc.bounds.dt_max + 1e-9) {
      std::snprintf(buf, sizeof buf, "time step %.4f outside [%g, %g]", dt,
                    sc.bounds.dt_min, sc.bounds.dt_max);
      return fail(buf);
    }
  }
  bool landed = false;
  for (int k = 0; k < n; ++k) {
    const double eps = x[L.eps(k)];
    const double f = distance(x.segment<kQuadNx>(L.xq(k)),
                              x.segment<kOmniNx>(L.xo(k)), sc.omni.z_omni);
    const double r = complementarity_residual(eps, f, x[L.nu(k)]);
    if (std::abs(r) > kInvTol) {
      std::snprintf(buf, sizeof buf, "coupling residual %.3e at stage %d", r,
                    k);
      return fail(buf);
    }
    if (eps > 1e-3 && f > sc.bounds.nu_max + 1e-4) {
      std::snprintf(buf, sizeof buf,
                    "separation %.4f m at stage %d with active indicator", f,
                    k);
      return fail(buf);
    }
    landed = landed || eps > 0.5;
  }
  if (!landed) return fail("landing transition split across stages");

  const QuadParams qp = sc.quad;
  const OmniParams op = sc.omni;
  const auto qf = [&qp](const double* xx, const double* uu, double* dx) {
    quad_dynamics_core(xx, uu, qp, dx);
  };
  const auto of = [&op](const double* xx, const double* uu, double* dx) {
    omni_dynamics_core(xx, uu, op, dx);
  };
  for (int k = 0; k < n; ++k) {
    double nq[kQuadNx], no[kOmniNx];
    const double dt = x[L.dt(k)];
    rk2_heun_step<kQuadNx>(qf, x.data() + L.xq(k), x.data() + L.uq(k), dt, nq);
    rk2_heun_step<kOmniNx>(of, x.data() + L.xo(k), x.data() + L.uo(k), dt, no);
    double defect = 0.0;
    for (int i = 0; i < kQuadNx; ++i) {
      defect = std::max(defect, std::abs(nq[i] - x[L.xq(k + 1) + i]));
    }
    for (int i = 0; i < kOmniNx; ++i) {
      defect = std::max(defect, std::abs(no[i] - x[L.xo(k + 1) + i]));
    }
    if (defect > kDefectTol) {
      if (defect_only) *defect_only = true;
      std::snprintf(buf, sizeof buf, "dynamics defect %.3e at stage %d",
                    defect, k);
      return fail(buf);
    }
  }
  return true;
}

/// The relaxation variable carries no cost, so once the one-sided coupling
/// row is satisfied nothing pulls it back onto the distance and it can
/// overshoot by a few 1e-6. Setting nu to the clamped distance is the exact
/// minimizer of the coupling residual in nu and touches nothing else.
void project_nu(Eigen::VectorXd& x, const StageLayout& L,
                const ScenarioConfig& sc) {
  for (int k = 0; k < L.N; ++k) {
    const double f = distance(x.segment<kQuadNx>(L.xq(k)),
                              x.segment<kOmniNx>(L.xo(k)), sc.omni.z_omni);
    x[L.nu(k)] = std::clamp(f, 0.0, sc.bounds.nu_max);
  }
}

/// True when the scenario starts inside the relaxation distance at an
/// exact hover equilibrium. The smoothed distance has curvature ~1/f at
/// coincidence, which defeats the solver, and the only sensible plan is
/// to stay put anyway.
bool docked_at_rest(const ScenarioConfig& sc) {
  if (distance(sc.x_q0, sc.x_omni0, sc.omni.z_omni) > sc.bounds.nu_max) {
    return false;
  }
  const double still = 1e-6;
  for (int i = 3; i < 5; ++i) {  // roll, pitch; yaw is free at hover
    if (std::abs(sc.x_q0[i]) > still) return false;
  }
  for (int i = 6; i < kQuadNx; ++i) {
    if (std::abs(sc.x_q0[i]) > still) return false;
  }
  return std::abs(sc.x_omni0[2]) <= still && std::abs(sc.x_omni0[3]) <= still;
}

/// Immediate-landing plan for a docked stationary start: hold the hover
/// equilibrium, land at stage 0, every interval at its lower bound. The
/// equalities hold exactly by construction; the point is not a stationary
/// point of the NLP (walking off after landing could still shave the
/// state cost), so it is reported as a feasible uncertified iterate.
LandingPlan docked_plan(const ScenarioConfig& sc, int n) {
  LandingPlan plan;
  plan.stages.resize(n + 1);
  plan.t.assign(n + 1, 0.0);
  const double nu =
      std::min(distance(sc.x_q0, sc.x_omni0, sc.omni.z_omni),
               sc.bounds.nu_max);
  const QuadInput hover =
      QuadInput::Constant(sc.quad.hover_thrust_per_rotor());
  for (int k = 0; k <= n; ++k) {
    PlanStage& s = plan.stages[k];
    s.x_q = sc.x_q0;
    s.x_omni = sc.x_omni0;
    s.dt = sc.bounds.dt_min;
    s.kappa = k == 0 ? 1.0 : 0.0;
    if (k < n) {
      s.u_q = hover;
      s.u_omni = OmniInput::Zero();
      s.eps = k == 0 ? 1.0 : 0.0;
      s.nu = nu;
      plan.t[k + 1] = plan.t[k] + s.dt;
    }
  }
  plan.landing_stage = 0;
  plan.landing_time = plan.t[1];
  plan.total_time = plan.t[n];
  plan.feasible = true;
  plan.report.status = SolveStatus::kStalled;
  plan.report.iterations = 0;
  plan.report.primal_inf = 0.0;
  plan.report.complementarity = 0.0;
  plan.report.wall_time = 0.0;
  plan.report.mu = 0.0;
  plan.report.objective =
      sc.weights.w1 * (n + 1) * sc.bounds.dt_min + sc.weights.w2 +
      sc.weights.w3 * (n + 1) * sc.x_q0.squaredNorm();
  return plan;
}

LandingPlan extract_plan(const Eigen::VectorXd& x, const StageLayout& L) {
  LandingPlan plan;
  const int n = L.N;
  plan.stages.resize(n + 1);
  plan.t.assign(n + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    PlanStage& s = plan.stages[k];
    s.x_q = x.segment<kQuadNx>(L.xq(k));
    s.x_omni = x.segment<kOmniNx>(L.xo(k));
    s.dt = x[L.dt(k)];
    s.kappa = x[L.kappa(k)];
    if (k < n) {
      s.u_q = x.segment<kQuadNu>(L.uq(k));
      s.u_omni = x.segment<kOmniNu>(L.uo(k));
      s.eps = x[L.eps(k)];
      s.nu = x[L.nu(k)];
      plan.t[k + 1] = plan.t[k] + s.dt;
    }
  }
  plan.total_time = plan.t[n];
  for (int k = 0; k < n; ++k) {
    if (plan.stages[k].eps > 0.5) {
      plan.landing_stage = k;
      break;
    }
  }
  if (plan.landing_stage >= 0) {
    plan.landing_time = plan.t[plan.landing_stage + 1];
  }
  return plan;
}

double polish_tolerance(const ScenarioConfig& sc) {
  return std::max(sc.solver.tol_kkt, kPolishTolFloor);
}

/// Warm-started solve of the equality-grade problem over the barrier
/// ladder, accepting the first iterate that passes the plan invariants.
/// A candidate failing only the re-integration check gets one extra
/// tightening solve at a colder barrier: the equalities keep contracting
/// even when the dual certificate has hit its floor.
bool polish(const NlpProblem& exact, const StageLayout& L,
            const ScenarioConfig& sc, const WarmStartData& warm,
            SolverResult* out, std::string* why, int* iters, double* wall) {
  SolveSettings st = sc.solver;
  st.tol_kkt = polish_tolerance(sc);
  st.max_iter = kPolishMaxIter;
  st.warm_start = true;
  st.warm_bound_push = 1e-4;

  SolverResult loose;  // failed only the defect check
  bool have_loose = false;
  for (const double mu : kPolishMu) {
    st.warm_mu = mu;
    SolverResult rt = solve(exact, st, &warm);
    *iters += rt.report.iterations;
    *wall += rt.report.wall_time;
    project_nu(rt.x, L, sc);
    bool defect_only = false;
    if (verify_plan(rt.x, L, sc, why, &defect_only)) {
      *out = std::move(rt);
      return true;
    }
    if (defect_only && !have_loose) {
      loose = std::move(rt);
      have_loose = true;
    }
  }
  if (have_loose) {
    st.tol_kkt = 1e-7;
    st.max_iter = 60;
    st.warm_mu = std::max(loose.report.mu * 1e-2, 1e-10);
    st.warm_bound_push = 1e-10;
    SolverResult rt = solve(exact, st, &loose.warm);
    *iters += rt.report.iterations;
    *wall += rt.report.wall_time;
    project_nu(rt.x, L, sc);
    if (verify_plan(rt.x, L, sc, why)) {
      *out = std::move(rt);
      return true;
    }
  }
  return false;
}

LandingPlan finish_plan(SolverResult&& accepted, const StageLayout& L,
                        int iters, double wall) {
  LandingPlan plan = extract_plan(accepted.x, L);
  plan.report = accepted.report;
  plan.report.iterations = iters;
  plan.report.wall_time = wall;
  plan.warm = std::move(accepted.warm);
  plan.feasible = true;
  return plan;
}

}  // namespace

int estimate_horizon(double f_dis_initial, double dt_max, double v_max,
                     int n_min, int n_max) {
  const double raw = f_dis_initial / (dt_max * v_max);
  const int n = static_cast<int>(std::ceil(raw - 1e-9));
  return std::clamp(n, n_min, n_max);
}

LandingPlan plan_landing(const ScenarioConfig& scenario) {
  LandingPlan plan;
  const double f0 =
      distance(scenario.x_q0, scenario.x_omni0, scenario.omni.z_omni);
  const int n =
      scenario.n_override > 0
          ? scenario.n_override
          : estimate_horizon(f0, scenario.bounds.dt_max,
                             quad_speed_bound(scenario.bounds), scenario.n_min,
                             scenario.n_max);
  if (docked_at_rest(scenario)) return docked_plan(scenario, n);

  // Reachability screen: every axis must be closable under the velocity
  // bounds within the chosen horizon. An unreachable separation is
  // reported here instead of being clamped into a doomed solve.
  const OcpBounds& b = scenario.bounds;
  const double horizon = n * b.dt_max;
  const double gap[3] = {std::abs(scenario.x_q0[0] - scenario.x_omni0[0]),
                         std::abs(scenario.x_q0[1] - scenario.x_omni0[1]),
                         std::abs(scenario.x_q0[2] - scenario.omni.z_omni)};
  const double close[3] = {
      std::abs(b.quad_state_upper[6]) + std::abs(b.omni_state_upper[2]),
      std::abs(b.quad_state_upper[7]) + std::abs(b.omni_state_upper[3]),
      std::abs(b.quad_state_upper[8])};
  const char axis[3] = {'x', 'y', 'z'};
  for (int i = 0; i < 3; ++i) {
    if (gap[i] > horizon * close[i] + 1e-12) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "%c separation %.3f m unreachable: at most %.3f m over %d "
                    "stages",
                    axis[i], gap[i], horizon * close[i], n);
      plan.message = buf;
      return plan;
    }
  }

  ScenarioConfig cont = scenario;
  cont.comp_sigma = kWideSigma;
  cont.comp_penalty = kCompPenalty;
  const NlpProblem wide = build_ocp(cont, n);
  SolveSettings s1 = scenario.solver;
  s1.tol_kkt = kApproachTol;
  s1.warm_start = false;
  SolverResult r1 = solve(wide, s1);
  int iters = r1.report.iterations;
  double wall = r1.report.wall_time;
  plan.report = r1.report;
  if (!r1.report.converged()) {
    plan.message = "approach stage failed: " + to_string(r1.report.status);
    return plan;
  }

  cont.comp_sigma = kExactSigma;
  const NlpProblem exact = build_ocp(cont, n);
  const StageLayout L{n};
  SolverResult acc;
  std::string why;
  if (!polish(exact, L, scenario, r1.warm, &acc, &why, &iters, &wall)) {
    plan.message = "landing polish rejected: " + why;
    plan.report.iterations = iters;
    plan.report.wall_time = wall;
    return plan;
  }
  return finish_plan(std::move(acc), L, iters, wall);
}

LandingPlan replan(const ScenarioConfig& scenario, const QuadState& x_q,
                   const OmniState& x_omni, const LandingPlan& previous,
                   double elapsed) {
  ScenarioConfig sc = scenario;
  // Measured states may sit marginally outside the box after a gust;
  // soft-clamp instead of refusing to replan.
  for (int i = 0; i < kQuadNx; ++i) {
    sc.x_q0[i] = std::clamp(x_q[i], sc.bounds.quad_state_lower[i],
                            sc.bounds.quad_state_upper[i]);
  }
  for (int i = 0; i < kOmniNx; ++i) {
    sc.x_omni0[i] = std::clamp(x_omni[i], sc.bounds.omni_state_lower[i],
                               sc.bounds.omni_state_upper[i]);
  }
  const int n = previous.n();
  if (docked_at_rest(sc) || !previous.feasible || previous.warm.empty() ||
      n <= 0) {
    return plan_landing(sc);
  }
  sc.n_override = n;  // warm data must match the problem structurally

  const StageLayout L{n};
  const int nvars = L.var_count();
  const WarmStartData& pw = previous.warm;
  if (pw.x_full.size() != nvars + n || pw.lambda.size() != L.con_count()) {
    return plan_landing(sc);
  }

  int shift = 0;
  while (shift < n && previous.t[shift + 1] <= elapsed + 1e-12) ++shift;
  const auto src = [&](int k) { return std::min(k + shift, n - 1); };

  // Time-shift the previous iterate: elapsed stages fall off the front,
  // the last running stage repeats at the back, the terminal block and
  // the boundary rows stay. Slack k belongs to the coupling row of stage
  // k, so it shifts with the stage.
  WarmStartData w;
  w.mu = pw.mu;
  w.x_full.resize(pw.x_full.size());
  w.z_lower.resize(pw.z_lower.size());
  w.z_upper.resize(pw.z_upper.size());
  w.lambda.resize(pw.lambda.size());
  constexpr int kS = StageLayout::kStageSize;
  for (int k = 0; k < n; ++k) {
    const int s = src(k);
    w.x_full.segment(L.xq(k), kS) = pw.x_full.segment(L.xq(s), kS);
    w.z_lower.segment(L.xq(k), kS) = pw.z_lower.segment(L.xq(s), kS);
    w.z_upper.segment(L.xq(k), kS) = pw.z_upper.segment(L.xq(s), kS);
    w.x_full[nvars + k] = pw.x_full[nvars + s];
    w.z_lower[nvars + k] = pw.z_lower[nvars + s];
    w.z_upper[nvars + k] = pw.z_upper[nvars + s];
    w.lambda.segment(L.row_defect(k), 16) =
        pw.lambda.segment(L.row_defect(s), 16);
    w.lambda[L.row_comp(k)] = pw.lambda[L.row_comp(s)];
    w.lambda[L.row_prog(k)] = pw.lambda[L.row_prog(s)];
  }
  constexpr int kT = StageLayout::kTerminalSize;
  w.x_full.segment(L.xq(n), kT) = pw.x_full.segment(L.xq(n), kT);
  w.z_lower.segment(L.xq(n), kT) = pw.z_lower.segment(L.xq(n), kT);
  w.z_upper.segment(L.xq(n), kT) = pw.z_upper.segment(L.xq(n), kT);
  w.lambda.segment(L.row_init(), 16) = pw.lambda.segment(L.row_init(), 16);
  w.lambda[L.row_kappa_first()] = pw.lambda[L.row_kappa_first()];
  w.lambda[L.row_kappa_last()] = pw.lambda[L.row_kappa_last()];

  w.x_full.segment<kQuadNx>(L.xq(0)) = sc.x_q0;
  w.x_full.segment<kOmniNx>(L.xo(0)) = sc.x_omni0;

  // Re-pin the progress variables: if the landing transition fell off the
  // front the shifted indicator has lost its mass, in which case the best
  // guess is an immediate landing; otherwise renormalize and rebuild the
  // counter so it runs 1 -> 0 again.
  double mass = 0.0;
  for (int k = 0; k < n; ++k) mass += w.x_full[L.eps(k)];
  if (mass < 0.5) {
    for (int k = 0; k < n; ++k) w.x_full[L.eps(k)] = 0.0;
    w.x_full[L.eps(0)] = 1.0;
  } else {
    for (int k = 0; k < n; ++k) w.x_full[L.eps(k)] /= mass;
  }
  double kap = 1.0;
  for (int k = 0; k < n; ++k) {
    w.x_full[L.kappa(k)] = kap;
    kap -= w.x_full[L.eps(k)];
  }
  w.x_full[L.kappa(n)] = 0.0;
  for (int k = 0; k < n; ++k) {
    const double f =
        distance(w.x_full.segment<kQuadNx>(L.xq(k)),
                 w.x_full.segment<kOmniNx>(L.xo(k)), sc.omni.z_omni);
    w.x_full[nvars + k] =
        complementarity_residual(w.x_full[L.eps(k)], f, w.x_full[L.nu(k)]);
  }

  ScenarioConfig cont = sc;
  cont.comp_sigma = kExactSigma;
  cont.comp_penalty = kCompPenalty;
  const NlpProblem exact = build_ocp(cont, n);

  SolveSettings st = sc.solver;
  st.tol_kkt = polish_tolerance(sc);
  st.max_iter = kPolishMaxIter;
  st.warm_start = true;
  int iters = 0;
  double wall = 0.0;
  // First straight from the shifted iterate at its own barrier (the
  // fixed-point case re-converges in a couple of steps), then once more
  // re-centered if the disturbance was too large for that.
  const std::pair<double, double> tries[] = {
      {std::max(pw.mu, 1e-9), 1e-8},
      {kPolishMu[0], 1e-4},
  };
  for (const auto& [mu, push] : tries) {
    st.warm_mu = mu;
    st.warm_bound_push = push;
    SolverResult rt = solve(exact, st, &w);
    iters += rt.report.iterations;
    wall += rt.report.wall_time;
    project_nu(rt.x, L, sc);
    std::string why;
    if (verify_plan(rt.x, L, sc, &why)) {
      return finish_plan(std::move(rt), L, iters, wall);
    }
  }
  LandingPlan fresh = plan_landing(sc);
  fresh.report.iterations += iters;
  fresh.report.wall_time += wall;
  return fresh;
}

}  // namespace coland
