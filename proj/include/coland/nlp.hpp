#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace coland {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Generic sparse NLP:
///   min f(x)  s.t.  c_lower <= c(x) <= c_upper,  x_lower <= x <= x_upper.
/// Rows with c_lower == c_upper are equalities. Jacobian and Lagrangian
/// Hessian are given as fixed sparsity patterns plus value callbacks; the
/// Hessian pattern covers the lower triangle of
///   sigma * H_f(x) + sum_i lambda_i H_{c_i}(x).
struct NlpProblem {
  int num_vars = 0;
  int num_cons = 0;
  Eigen::VectorXd x_lower, x_upper;
  Eigen::VectorXd c_lower, c_upper;
  Eigen::VectorXd x0;

  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> gradient;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> constraints;

  std::vector<std::pair<int, int>> jac_pattern;  // (constraint row, variable)
  std::function<void(const Eigen::VectorXd&, std::vector<double>&)> jacobian;

  std::vector<std::pair<int, int>> hess_pattern;  // lower triangle, row >= col
  std::function<void(const Eigen::VectorXd&, double sigma,
                     const Eigen::VectorXd& lambda, std::vector<double>&)>
      hessian;
};

enum class SolveStatus {
  kConverged,
  kMaxIter,
  kTimeLimit,
  kRestorationFailed,
  kStalled,  // no acceptable step from a feasible iterate
  kEvalError,
};

std::string to_string(SolveStatus status);

struct SolveSettings {
  double tol_kkt = 1e-8;
  int max_iter = 300;
  double mu_init = 0.1;
  double reg_floor = 1e-11;  // dual regularization floor in the KKT system
  double time_limit = kInf;  // seconds
  bool use_rcm = true;
  bool warm_start = false;   // consume the warm-start data passed to solve()
  double warm_mu = 1e-6;
  double warm_bound_push = 1e-8;
  double bound_push = 1e-2;  // kappa_1 and kappa_2 of the cold start
  int verbosity = 0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kEvalError;
  int iterations = 0;
  double primal_inf = kInf;       // inf norm of constraint violation
  double dual_inf = kInf;         // inf norm of scaled stationarity
  double complementarity = kInf;  // inf norm of scaled complementarity
  double objective = kInf;
  double wall_time = 0.0;  // seconds
  double mu = 0.0;         // final barrier parameter

  bool converged() const { return status == SolveStatus::kConverged; }
};

/// Internal iterate snapshot (variables plus slacks and all multipliers)
/// for warm-starting a structurally identical problem.
struct WarmStartData {
  Eigen::VectorXd x_full;  // primal including inequality slacks
  Eigen::VectorXd lambda;  // equality-form constraint multipliers
  Eigen::VectorXd z_lower, z_upper;
  double mu = 1e-6;

  bool empty() const { return x_full.size() == 0; }
};

struct SolverResult {
  Eigen::VectorXd x;  // original variables only
  SolveReport report;
  WarmStartData warm;
};

/// Primal-dual interior-point solve with filter line search.
SolverResult solve(const NlpProblem& problem, const SolveSettings& settings,
                   const WarmStartData* warm = nullptr);

}  // namespace coland
