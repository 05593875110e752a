#pragma once

#include <Eigen/Dense>

#include "coland/models.hpp"
#include "coland/nlp.hpp"

namespace coland {

struct OcpWeights {
  double w1 = 20.0;  // flight-time weight
  double w2 = 1.0;   // progress-counter regularization
  double w3 = 1.0;   // quadrotor state cost (0 disables)
};

struct OcpBounds {
  Eigen::Matrix<double, kQuadNx, 1> quad_state_lower, quad_state_upper;
  Eigen::Matrix<double, kOmniNx, 1> omni_state_lower, omni_state_upper;
  Eigen::Matrix<double, kQuadNu, 1> quad_input_lower, quad_input_upper;
  Eigen::Matrix<double, kOmniNu, 1> omni_input_lower, omni_input_upper;
  double dt_min = 0.01, dt_max = 0.1;
  double nu_max = 0.01;
};

/// Symmetric bounds from the physical limit table: arena box +-3 m in x, y
/// and [0, 2] m in z, +-0.5 rad roll/pitch (yaw free), +-0.5 m/s velocity,
/// +-(0.4, 0.4, 3.48) rad/s body rates, rotor thrusts in
/// [0.5, 1.5] f_hover, omni velocity +-0.3 m/s, omni force +-1 N at any
/// heading.
OcpBounds make_default_bounds(const QuadParams& quad);

struct ScenarioConfig {
  QuadParams quad;
  OmniParams omni;
  OcpBounds bounds;
  OcpWeights weights;
  QuadState x_q0 = QuadState::Zero();
  OmniState x_omni0 = OmniState::Zero();
  int n_override = 0;          // 0 selects the horizon automatically
  int n_min = 20, n_max = 30;  // clamp range for the automatic horizon
  SolveSettings solver;
  // Negative keeps the landing coupling an exact equality; a value >= 0
  // relaxes it to eps*(f_dis - nu) <= sigma (robustness fallback driven
  // toward 0 over restarts by the planner).
  double comp_sigma = -1.0;
  // Charges comp_penalty * sum_k (eps_k (f_dis,k - nu_k))^2 on top of the
  // stage objective. Zero in the exact formulation; the planner's
  // continuation uses it to pull the approach toward contact before the
  // coupling is tightened.
  double comp_penalty = 0.0;

  ScenarioConfig() : bounds(make_default_bounds(quad)) {}
};

/// Variable and constraint indexing of the transcribed problem. Stages
/// k = 0..N-1 carry [x_q, x_omni, u_q, u_omni, dt, eps, kappa, nu]; the
/// terminal stage carries [x_q, x_omni, kappa, dt].
struct StageLayout {
  int N = 0;
  static constexpr int kStageSize = 26;
  static constexpr int kTerminalSize = 18;

  int var_count() const { return N * kStageSize + kTerminalSize; }
  int con_count() const { return 18 * N + 18; }

  int xq(int k) const { return k * kStageSize; }
  int xo(int k) const { return k * kStageSize + 12; }
  int uq(int k) const { return k * kStageSize + 16; }  // k < N
  int uo(int k) const { return k * kStageSize + 20; }  // k < N
  int dt(int k) const {
    return k < N ? k * kStageSize + 22 : N * kStageSize + 17;
  }
  int eps(int k) const { return k * kStageSize + 23; }  // k < N
  int kappa(int k) const {
    return k < N ? k * kStageSize + 24 : N * kStageSize + 16;
  }
  int nu(int k) const { return k * kStageSize + 25; }  // k < N

  int row_init() const { return 0; }                   // 16 rows
  int row_defect(int k) const { return 16 + 16 * k; }  // 16 rows per stage
  int row_comp(int k) const { return 16 + 16 * N + k; }
  int row_prog(int k) const { return 16 + 17 * N + k; }
  int row_kappa_first() const { return 16 + 18 * N; }
  int row_kappa_last() const { return 16 + 18 * N + 1; }
};

/// Euclidean distance between the quadrotor and the landing point above
/// the ground robot.
double distance(const QuadState& x_q, const OmniState& x_omni, double z_omni);

/// eps * (f_dis - nu); zero when either the landing index is inactive or
/// the robots are within the relaxation distance.
double complementarity_residual(double eps, double f_dis, double nu);

/// Residuals of the progress recurrence kappa_{k+1} = kappa_k - eps_k plus
/// the two boundary pins kappa_0 = 1 and kappa_N = 0. kappa has length
/// N + 1 and eps length N; the result has length N + 2.
Eigen::VectorXd progress_constraints(const Eigen::VectorXd& kappa,
                                     const Eigen::VectorXd& eps);

/// w1 * sum dt + w2 * sum kappa + w3 * sum |x_q|^2 over all stages
/// including the terminal one.
double ocp_objective(const Eigen::VectorXd& z, const StageLayout& layout,
                     const OcpWeights& weights);

/// Transcribes the landing problem over N stages into a sparse NLP.
/// Throws std::invalid_argument on inconsistent bounds or initial states
/// outside them.
NlpProblem build_ocp(const ScenarioConfig& scenario, int N);

}  // namespace coland
