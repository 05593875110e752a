#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "coland/integrate.hpp"
#include "coland/ocp.hpp"

using namespace coland;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

Eigen::MatrixXd dense_jacobian(const NlpProblem& p, const Eigen::VectorXd& x) {
  std::vector<double> vals(p.jac_pattern.size());
  p.jacobian(x, vals);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(p.num_cons, p.num_vars);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    j(p.jac_pattern[i].first, p.jac_pattern[i].second) += vals[i];
  }
  return j;
}

Eigen::MatrixXd dense_hessian(const NlpProblem& p, const Eigen::VectorXd& x,
                              double sigma, const Eigen::VectorXd& lam) {
  std::vector<double> vals(p.hess_pattern.size());
  p.hessian(x, sigma, lam, vals);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.num_vars, p.num_vars);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const auto [r, c] = p.hess_pattern[i];
    h(r, c) += vals[i];
    if (r != c) h(c, r) += vals[i];
  }
  return h;
}

Eigen::VectorXd lagrangian_gradient(const NlpProblem& p,
                                    const Eigen::VectorXd& x, double sigma,
                                    const Eigen::VectorXd& lam) {
  Eigen::VectorXd g;
  p.gradient(x, g);
  return sigma * g + dense_jacobian(p, x).transpose() * lam;
}

// Random point with every variable strictly inside its box (unbounded
// variables land in [-2, 2]); attitude stays away from the Euler
// singularity by construction of the default bounds.
Eigen::VectorXd random_interior_point(const NlpProblem& p, std::mt19937& rng) {
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  Eigen::VectorXd x(p.num_vars);
  for (int i = 0; i < p.num_vars; ++i) {
    const double lo = std::max(p.x_lower[i], -2.0);
    const double hi = std::min(p.x_upper[i], 2.0);
    x[i] = lo + unit(rng) * (hi - lo);
  }
  return x;
}

}  // namespace

TEST_SUITE("ocp") {

TEST_CASE("stage layout matches the transcription dimensions") {
  const StageLayout l{30};
  CHECK(l.var_count() == 798);
  CHECK(l.con_count() == 558);
  const StageLayout s{2};
  CHECK(s.var_count() == 70);
  CHECK(s.con_count() == 54);
}

TEST_CASE("stage layout indexes variables and rows without gaps") {
  const StageLayout l{3};
  std::set<int> vars;
  for (int k = 0; k <= l.N; ++k) {
    for (int i = 0; i < kQuadNx; ++i) vars.insert(l.xq(k) + i);
    for (int i = 0; i < kOmniNx; ++i) vars.insert(l.xo(k) + i);
    vars.insert(l.dt(k));
    vars.insert(l.kappa(k));
  }
  for (int k = 0; k < l.N; ++k) {
    for (int i = 0; i < kQuadNu; ++i) vars.insert(l.uq(k) + i);
    for (int i = 0; i < kOmniNu; ++i) vars.insert(l.uo(k) + i);
    vars.insert(l.eps(k));
    vars.insert(l.nu(k));
  }
  REQUIRE(static_cast<int>(vars.size()) == l.var_count());
  CHECK(*vars.begin() == 0);
  CHECK(*vars.rbegin() == l.var_count() - 1);

  std::set<int> rows;
  for (int i = 0; i < 16; ++i) rows.insert(l.row_init() + i);
  for (int k = 0; k < l.N; ++k) {
    for (int i = 0; i < 16; ++i) rows.insert(l.row_defect(k) + i);
    rows.insert(l.row_comp(k));
    rows.insert(l.row_prog(k));
  }
  rows.insert(l.row_kappa_first());
  rows.insert(l.row_kappa_last());
  REQUIRE(static_cast<int>(rows.size()) == l.con_count());
  CHECK(*rows.begin() == 0);
  CHECK(*rows.rbegin() == l.con_count() - 1);
}

TEST_CASE("distance matches hand-computed values") {
  QuadState xq = QuadState::Zero();
  OmniState xo = OmniState::Zero();
  xq[2] = 0.157;
  CHECK(distance(xq, xo, 0.157) == doctest::Approx(0.0).epsilon(1e-15));

  xq[2] = 0.5 + 0.157;
  CHECK(distance(xq, xo, 0.157) == doctest::Approx(0.5).epsilon(1e-12));

  // Hardware scenario geometry: the exact norm of the start offset.
  xq << 0, 0, 0.65, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  xo << -1.57, 0.95, 0, 0;
  const double d = distance(xq, xo, 0.157);
  CHECK(d == doctest::Approx(std::sqrt(3.610449)).epsilon(1e-12));
  CHECK(std::abs(d - 1.9003) < 2e-4);
}

TEST_CASE("complementarity residual examples") {
  CHECK(complementarity_residual(0.0, 1.7, 0.003) == 0.0);
  CHECK(complementarity_residual(0.5, 0.01, 0.01) == doctest::Approx(0.0));
  CHECK(complementarity_residual(1.0, 0.05, 0.01) == doctest::Approx(0.04));
}

TEST_CASE("progress recurrence accepts a single-step transition") {
  Eigen::VectorXd kappa(3), eps(2);
  kappa << 1.0, 1.0, 0.0;
  eps << 0.0, 1.0;
  const Eigen::VectorXd r = progress_constraints(kappa, eps);
  REQUIRE(r.size() == 4);
  CHECK(r.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("progress recurrence rejects a transition that never happens") {
  Eigen::VectorXd kappa = Eigen::VectorXd::Ones(3);
  Eigen::VectorXd eps = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd r = progress_constraints(kappa, eps);
  CHECK(r.head(3).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(r[3] == doctest::Approx(1.0));  // terminal pin violated
}

TEST_CASE("progress recurrence telescopes to a unit transition budget") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial % 7;
    Eigen::VectorXd eps(n);
    for (int i = 0; i < n; ++i) eps[i] = unit(rng);
    eps /= eps.sum();  // unit budget
    Eigen::VectorXd kappa(n + 1);
    kappa[0] = 1.0;
    for (int i = 0; i < n; ++i) kappa[i + 1] = kappa[i] - eps[i];
    const Eigen::VectorXd r = progress_constraints(kappa, eps);
    CHECK(r.lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("objective sums all stages including the terminal one") {
  const StageLayout l{2};
  const OcpWeights w;  // 20, 1, 1
  Eigen::VectorXd z = Eigen::VectorXd::Zero(l.var_count());
  CHECK(ocp_objective(z, l, w) == 0.0);

  for (int k = 0; k <= l.N; ++k) z[l.dt(k)] = 0.1;
  z[l.kappa(0)] = 1.0;
  z[l.kappa(1)] = 1.0;
  z[l.kappa(2)] = 0.0;
  CHECK(ocp_objective(z, l, w) == doctest::Approx(8.0).epsilon(1e-14));

  z[l.xq(1) + 4] = 2.0;  // one quad velocity entry
  CHECK(ocp_objective(z, l, w) == doctest::Approx(12.0).epsilon(1e-14));

  OcpWeights w3off = w;
  w3off.w3 = 0.0;
  CHECK(ocp_objective(z, l, w3off) == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("build_ocp seeds hover thrust and pins initial states") {
  ScenarioConfig sc;
  sc.x_q0[2] = 0.65;
  sc.x_omni0 << -1.57, 0.95, 0, 0;
  const int n = 4;
  const NlpProblem p = build_ocp(sc, n);
  const StageLayout l{n};
  CHECK(p.num_vars == l.var_count());
  CHECK(p.num_cons == l.con_count());

  const double fh = sc.quad.hover_thrust_per_rotor();
  CHECK(fh == doctest::Approx(0.25 * 0.0371 * 9.81).epsilon(1e-14));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < kQuadNu; ++i) {
      CHECK(p.x0[l.uq(k) + i] == doctest::Approx(fh).epsilon(1e-14));
    }
    for (int i = 0; i < kOmniNu; ++i) CHECK(p.x0[l.uo(k) + i] == 0.0);
    CHECK(p.x0[l.eps(k)] == 0.0);
    CHECK(p.x0[l.nu(k)] == 0.0);
  }
  CHECK(p.x0.segment<kQuadNx>(l.xq(0)).isApprox(sc.x_q0));
  CHECK(p.x0.segment<kOmniNx>(l.xo(0)).isApprox(sc.x_omni0));
  CHECK(p.x0.segment<kQuadNx>(l.xq(1)).isZero());

  // Initial-state pins are rows, so stage-0 state bounds stay the plain
  // boxes and the pin rows carry the fixed values.
  Eigen::VectorXd c;
  p.constraints(p.x0, c);
  CHECK(c.head(16).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(c.allFinite());
}

TEST_CASE("build_ocp boxes the right variables and frees the rest") {
  ScenarioConfig sc;
  const int n = 3;
  const NlpProblem p = build_ocp(sc, n);
  const StageLayout l{n};
  for (int k = 0; k <= n; ++k) {
    CHECK(p.x_lower[l.kappa(k)] == -kInf);
    CHECK(p.x_upper[l.kappa(k)] == kInf);
    CHECK(p.x_lower[l.xq(k) + 5] == -kInf);  // yaw unbounded
    CHECK(p.x_upper[l.xq(k) + 5] == kInf);
    CHECK(p.x_lower[l.dt(k)] == doctest::Approx(0.01));
    CHECK(p.x_upper[l.dt(k)] == doctest::Approx(0.1));
    CHECK(p.x_lower[l.xq(k) + 2] == 0.0);  // altitude above ground
    CHECK(p.x_upper[l.xq(k) + 3] == doctest::Approx(0.5));
    CHECK(p.x_upper[l.xq(k) + 11] == doctest::Approx(3.48));
  }
  const double fh = sc.quad.hover_thrust_per_rotor();
  for (int k = 0; k < n; ++k) {
    CHECK(p.x_lower[l.eps(k)] == 0.0);
    CHECK(p.x_upper[l.eps(k)] == 1.0);
    CHECK(p.x_lower[l.nu(k)] == 0.0);
    CHECK(p.x_upper[l.nu(k)] == doctest::Approx(0.01));
    CHECK(p.x_lower[l.uq(k)] == doctest::Approx(0.5 * fh));
    CHECK(p.x_upper[l.uq(k)] == doctest::Approx(1.5 * fh));
    CHECK(p.x_upper[l.uo(k) + 1] == doctest::Approx(M_PI));
  }
  // Every row is an equality by default.
  CHECK(p.c_lower.isZero());
  CHECK(p.c_upper.isZero());
}

TEST_CASE("relaxed-inequality mode widens only the coupling rows") {
  ScenarioConfig sc;
  sc.comp_sigma = 0.05;
  const int n = 3;
  const NlpProblem p = build_ocp(sc, n);
  const StageLayout l{n};
  for (int k = 0; k < n; ++k) {
    CHECK(p.c_lower[l.row_comp(k)] == -kInf);
    CHECK(p.c_upper[l.row_comp(k)] == doctest::Approx(0.05));
    CHECK(p.c_lower[l.row_prog(k)] == 0.0);
    CHECK(p.c_upper[l.row_prog(k)] == 0.0);
  }
}

TEST_CASE("a rollout of the stage dynamics zeroes the defect rows") {
  ScenarioConfig sc;
  sc.x_q0[2] = 0.8;
  sc.x_omni0 << 0.3, -0.2, 0.1, 0.05;
  const int n = 4;
  const NlpProblem p = build_ocp(sc, n);
  const StageLayout l{n};

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p.num_vars);
  z.segment<kQuadNx>(l.xq(0)) = sc.x_q0;
  z.segment<kOmniNx>(l.xo(0)) = sc.x_omni0;
  for (int k = 0; k <= n; ++k) {
    z[l.dt(k)] = 0.05;
    z[l.kappa(k)] = 1.0;
  }
  const QuadParams qp;
  const OmniParams op;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < kQuadNu; ++i) {
      z[l.uq(k) + i] = p.x_lower[l.uq(k) + i] +
                       unit(rng) * (p.x_upper[l.uq(k) + i] -
                                    p.x_lower[l.uq(k) + i]);
    }
    z[l.uo(k)] = 0.4 * unit(rng);
    z[l.uo(k) + 1] = unit(rng);
    double xq_next[kQuadNx], xo_next[kOmniNx];
    rk2_heun_step<kQuadNx>(
        [&](const double* x, const double* u, double* dx) {
          quad_dynamics_core(x, u, qp, dx);
        },
        z.data() + l.xq(k), z.data() + l.uq(k), z[l.dt(k)], xq_next);
    rk2_heun_step<kOmniNx>(
        [&](const double* x, const double* u, double* dx) {
          omni_dynamics_core(x, u, op, dx);
        },
        z.data() + l.xo(k), z.data() + l.uo(k), z[l.dt(k)], xo_next);
    for (int i = 0; i < kQuadNx; ++i) z[l.xq(k + 1) + i] = xq_next[i];
    for (int i = 0; i < kOmniNx; ++i) z[l.xo(k + 1) + i] = xo_next[i];
  }

  Eigen::VectorXd c;
  p.constraints(z, c);
  CHECK(c.head(16).lpNorm<Eigen::Infinity>() == 0.0);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 16; ++i) {
      CHECK(std::abs(c[l.row_defect(k) + i]) < 1e-12);
    }
    CHECK(c[l.row_comp(k)] == 0.0);  // eps = 0 kills the coupling
    CHECK(std::abs(c[l.row_prog(k)]) < 1e-15);
  }
  CHECK(c[l.row_kappa_first()] == 0.0);
  CHECK(c[l.row_kappa_last()] == doctest::Approx(1.0));  // never landed
}

TEST_CASE("gradient matches central finite differences") {
  ScenarioConfig sc;
  const NlpProblem p = build_ocp(sc, 3);
  std::mt19937 rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::VectorXd x = random_interior_point(p, rng);
    Eigen::VectorXd g;
    p.gradient(x, g);
    const double h = 1e-6;
    for (int j = 0; j < p.num_vars; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (p.objective(xp) - p.objective(xm)) / (2.0 * h);
      CHECK(rel_err(g[j], fd) < 1e-6);
    }
  }
}

TEST_CASE("jacobian matches central finite differences") {
  ScenarioConfig sc;
  sc.x_q0[2] = 0.5;
  const NlpProblem p = build_ocp(sc, 3);
  std::set<std::pair<int, int>> pattern(p.jac_pattern.begin(),
                                        p.jac_pattern.end());
  std::mt19937 rng(29);
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::VectorXd x = random_interior_point(p, rng);
    const Eigen::MatrixXd j = dense_jacobian(p, x);
    const double h = 1e-6;
    double worst = 0.0;
    for (int col = 0; col < p.num_vars; ++col) {
      Eigen::VectorXd xp = x, xm = x, cp, cm;
      xp[col] += h;
      xm[col] -= h;
      p.constraints(xp, cp);
      p.constraints(xm, cm);
      for (int row = 0; row < p.num_cons; ++row) {
        const double fd = (cp[row] - cm[row]) / (2.0 * h);
        worst = std::max(worst, rel_err(j(row, col), fd));
        if (std::abs(fd) > 1e-7) {
          CHECK(pattern.count({row, col}) == 1);
        }
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("hessian matches finite differences of the lagrangian gradient") {
  ScenarioConfig sc;
  sc.x_q0[2] = 0.5;
  const NlpProblem p = build_ocp(sc, 2);
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> lamdist(-1.0, 1.0);
  for (double sigma : {1.0, 0.5}) {
    const Eigen::VectorXd x = random_interior_point(p, rng);
    Eigen::VectorXd lam(p.num_cons);
    for (int i = 0; i < p.num_cons; ++i) lam[i] = lamdist(rng);
    const Eigen::MatrixXd hess = dense_hessian(p, x, sigma, lam);
    CHECK(hess.isApprox(hess.transpose(), 1e-12));
    const double h = 1e-5;
    double worst = 0.0;
    for (int j = 0; j < p.num_vars; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Eigen::VectorXd fd =
          (lagrangian_gradient(p, xp, sigma, lam) -
           lagrangian_gradient(p, xm, sigma, lam)) /
          (2.0 * h);
      for (int i = 0; i < p.num_vars; ++i) {
        worst = std::max(worst, rel_err(hess(i, j), fd[i]));
      }
    }
    CHECK(worst < 5e-6);
  }
}

TEST_CASE("penalty-mode derivatives match finite differences") {
  ScenarioConfig sc;
  sc.x_q0[2] = 0.5;
  sc.comp_sigma = 5.0;
  sc.comp_penalty = 3.7;
  const NlpProblem p = build_ocp(sc, 2);
  std::mt19937 rng(53);
  const Eigen::VectorXd x = random_interior_point(p, rng);

  // The penalty shows up in the objective value itself.
  ScenarioConfig plain = sc;
  plain.comp_penalty = 0.0;
  const NlpProblem p0 = build_ocp(plain, 2);
  CHECK(p.objective(x) > p0.objective(x));

  Eigen::VectorXd g;
  p.gradient(x, g);
  const double h = 1e-6;
  for (int j = 0; j < p.num_vars; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (p.objective(xp) - p.objective(xm)) / (2.0 * h);
    CHECK(rel_err(g[j], fd) < 1e-6);
  }

  std::uniform_real_distribution<double> lamdist(-1.0, 1.0);
  Eigen::VectorXd lam(p.num_cons);
  for (int i = 0; i < p.num_cons; ++i) lam[i] = lamdist(rng);
  const Eigen::MatrixXd hess = dense_hessian(p, x, 1.0, lam);
  const double hh = 1e-5;
  double worst = 0.0;
  for (int j = 0; j < p.num_vars; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += hh;
    xm[j] -= hh;
    const Eigen::VectorXd fd = (lagrangian_gradient(p, xp, 1.0, lam) -
                                lagrangian_gradient(p, xm, 1.0, lam)) /
                               (2.0 * hh);
    for (int i = 0; i < p.num_vars; ++i) {
      worst = std::max(worst, rel_err(hess(i, j), fd[i]));
    }
  }
  CHECK(worst < 5e-6);
}

TEST_CASE("build_ocp rejects invalid configurations") {
  ScenarioConfig sc;
  CHECK_THROWS_AS(build_ocp(sc, 1), std::invalid_argument);

  ScenarioConfig bad_dt;
  bad_dt.bounds.dt_min = 0.0;
  CHECK_THROWS_AS(build_ocp(bad_dt, 5), std::invalid_argument);

  ScenarioConfig low;
  low.x_q0[2] = -0.5;  // below the altitude floor
  CHECK_THROWS_AS(build_ocp(low, 5), std::invalid_argument);

  ScenarioConfig crossed;
  crossed.bounds.quad_state_lower[3] = 1.0;
  crossed.bounds.quad_state_upper[3] = -1.0;
  CHECK_THROWS_AS(build_ocp(crossed, 5), std::invalid_argument);

  ScenarioConfig far;
  far.x_omni0[0] = 5.0;  // outside the workspace box
  CHECK_THROWS_AS(build_ocp(far, 5), std::invalid_argument);
}

TEST_CASE("nearly-docked scenario lands via the relaxation continuation") {
  ScenarioConfig sc;
  sc.x_q0[2] = 0.167;  // 1 cm above the platform
  const int n = 5;

  // Approach stage: the coupling row stays wide while the quadratic
  // penalty pulls the approach toward contact.
  sc.comp_sigma = 1e3;
  sc.comp_penalty = 1e4;
  const NlpProblem wide = build_ocp(sc, n);
  SolveSettings st;
  st.tol_kkt = 1e-4;
  SolverResult stage1 = solve(wide, st);
  REQUIRE(stage1.report.converged());

  // Polish: tighten the coupling to equality grade from the warm iterate.
  sc.comp_sigma = 1e-7;
  const NlpProblem p = build_ocp(sc, n);
  st.tol_kkt = 1e-5;
  st.warm_start = true;
  st.warm_mu = 1e-5;
  st.warm_bound_push = 1e-4;
  SolverResult res = solve(p, st, &stage1.warm);
  REQUIRE(res.report.converged());

  const StageLayout l{n};
  double eps_sum = 0.0;
  for (int k = 0; k < n; ++k) eps_sum += res.x[l.eps(k)];
  CHECK(eps_sum == doctest::Approx(1.0).epsilon(1e-6));
  for (int k = 0; k < n; ++k) {
    CHECK(res.x[l.kappa(k + 1)] <= res.x[l.kappa(k)] + 1e-8);
  }
  for (int k = 0; k <= n; ++k) {
    CHECK(res.x[l.dt(k)] >= 0.01 - 1e-9);
    CHECK(res.x[l.dt(k)] <= 0.1 + 1e-9);
  }
  Eigen::VectorXd c;
  p.constraints(res.x, c);
  for (int k = 0; k < n; ++k) {
    CHECK(std::abs(c[l.row_comp(k)]) <= 1e-6);
  }
  // The transition stage must sit on the platform.
  int k_star = -1;
  for (int k = 0; k < n; ++k) {
    if (res.x[l.eps(k)] > 0.5) k_star = k;
  }
  REQUIRE(k_star >= 0);
  const QuadState xq = res.x.segment<kQuadNx>(l.xq(k_star));
  const OmniState xo = res.x.segment<kOmniNx>(l.xo(k_star));
  CHECK(distance(xq, xo, sc.omni.z_omni) <= 0.01 + 1e-4);

  // Warm restart from the solution: same problem, so it should finish
  // almost immediately when resumed at its own final barrier.
  SolveSettings warm_st = st;
  warm_st.warm_mu = std::max(res.warm.mu, 1e-9);
  warm_st.warm_bound_push = 1e-8;
  SolverResult rewarmed = solve(p, warm_st, &res.warm);
  CHECK(rewarmed.report.converged());
  CHECK(rewarmed.report.iterations <= 3);
}

}  // TEST_SUITE
