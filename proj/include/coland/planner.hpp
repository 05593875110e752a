#pragma once

#include <string>
#include <vector>

#include "coland/ocp.hpp"

namespace coland {

/// Decision variables of one transcription stage. The terminal stage has
/// no inputs and no landing indicator; those fields stay zero. Its dt is
/// a cost-only variable that does not advance the timestamp grid.
struct PlanStage {
  QuadState x_q = QuadState::Zero();
  OmniState x_omni = OmniState::Zero();
  QuadInput u_q = QuadInput::Zero();
  OmniInput u_omni = OmniInput::Zero();
  double dt = 0.0;
  double eps = 0.0;
  double kappa = 0.0;
  double nu = 0.0;
};

/// A complete landing trajectory for both robots. Feasible plans satisfy,
/// independently of the solver's formal exit status:
///   - sum eps = 1 within 1e-6 and a unique landing stage with eps > 0.5,
///   - |eps (f_dis - nu)| <= 1e-6 at every stage,
///   - distance at most nu_max + 1e-4 wherever eps > 1e-3,
///   - kappa non-increasing from 1 to 0,
///   - every dt inside [dt_min, dt_max],
///   - stagewise re-integration reproducing the states to 1e-8.
struct LandingPlan {
  bool feasible = false;
  std::string message;  // diagnostic when infeasible

  std::vector<PlanStage> stages;  // N + 1 entries
  std::vector<double> t;          // knot times, t[k] = sum of dt before k
  int landing_stage = -1;         // first stage with eps > 0.5
  double landing_time = 0.0;      // t just after the landing transition
  double total_time = 0.0;        // duration of the full horizon
  SolveReport report;             // accepted solve, wall/iterations totaled
  WarmStartData warm;             // iterate snapshot for replanning

  int n() const {
    return stages.empty() ? 0 : static_cast<int>(stages.size()) - 1;
  }
};

/// Stage count estimate ceil(f_dis / (dt_max * v_max)) clamped into
/// [n_min, n_max].
int estimate_horizon(double f_dis_initial, double dt_max, double v_max,
                     int n_min, int n_max);

/// Plans a cooperative landing from the scenario's initial states.
///
/// The horizon comes from n_override if positive, otherwise from
/// estimate_horizon with v_max taken as the largest quadrotor speed bound
/// component. A scenario whose initial separation is unreachable within
/// the chosen horizon under the velocity bounds is reported infeasible
/// up front rather than clamped.
///
/// The landing coupling is solved by continuation: an approach stage with
/// the coupling row kept wide and a quadratic pull-in penalty, then a
/// warm-started polish that tightens the row to equality grade. The
/// polish retries over a short barrier ladder and accepts the first
/// iterate that passes the plan invariants above. Stationarity is
/// certified to max(solver.tol_kkt, 1e-5); the landing corner is
/// degenerate, so tighter dual tolerances are not reliably certifiable,
/// while the feasibility invariants are verified directly.
///
/// Throws std::invalid_argument (from the transcription) on malformed
/// scenarios, e.g. initial states outside bounds.
LandingPlan plan_landing(const ScenarioConfig& scenario);

/// Re-plans from measured states mid-flight. The previous plan is shifted
/// by the elapsed time (fully elapsed stages dropped, last running stage
/// repeated to refill, progress variables re-pinned so kappa again runs
/// 1 -> 0) and used to warm-start the equality-grade problem directly.
/// Falls back to the full continuation when the warm solve does not
/// produce a plan passing the invariants. The horizon is kept at the
/// previous plan's stage count so the warm start matches structurally.
LandingPlan replan(const ScenarioConfig& scenario, const QuadState& x_q,
                   const OmniState& x_omni, const LandingPlan& previous,
                   double elapsed);

}  // namespace coland
