#include "coland/ocp.hpp"

#include <cmath>
#include <stdexcept>

#include "coland/integrate.hpp"

namespace coland {

namespace {

// Keeps the distance differentiable at contact; error is below the
// smoothing constant everywhere.
constexpr double kDistSmooth = 1e-9;

struct QuadCore {
  QuadParams p;
  template <typename T>
  void operator()(const T* x, const T* u, T* dx) const {
    quad_dynamics_core(x, u, p, dx);
  }
};

struct OmniCore {
  OmniParams p;
  template <typename T>
  void operator()(const T* x, const T* u, T* dx) const {
    omni_dynamics_core(x, u, p, dx);
  }
};

// Landing coupling over the stacked locals [p_q(3), p_omni(2), eps, nu].
template <typename T>
T comp_core(const T* v, double z_omni) {
  T d0 = v[0] - v[3];
  T d1 = v[1] - v[4];
  T d2 = v[2] - z_omni;
  T f = sqrt(d0 * d0 + d1 * d1 + d2 * d2 + kDistSmooth * kDistSmooth);
  return v[5] * (f - v[6]);
}

template <typename Derived>
void require_ordered(const Eigen::MatrixBase<Derived>& lo,
                     const Eigen::MatrixBase<Derived>& hi, const char* what) {
  for (int i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) {
      throw std::invalid_argument(std::string("inconsistent bounds: ") + what);
    }
  }
}

template <typename Derived>
void require_inside(const Eigen::MatrixBase<Derived>& x,
                    const Eigen::MatrixBase<Derived>& lo,
                    const Eigen::MatrixBase<Derived>& hi, const char* what) {
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lo[i] || x[i] > hi[i]) {
      throw std::invalid_argument(
          std::string("initial state outside bounds: ") + what);
    }
  }
}

}  // namespace

OcpBounds make_default_bounds(const QuadParams& quad) {
  OcpBounds b;
  const double inf = kInf;
  b.quad_state_lower << -3, -3, 0, -0.5, -0.5, -inf, -0.5, -0.5, -0.5, -0.4,
      -0.4, -3.48;
  b.quad_state_upper << 3, 3, 2, 0.5, 0.5, inf, 0.5, 0.5, 0.5, 0.4, 0.4, 3.48;
  b.omni_state_lower << -3, -3, -0.3, -0.3;
  b.omni_state_upper << 3, 3, 0.3, 0.3;
  const double fh = quad.hover_thrust_per_rotor();
  b.quad_input_lower.setConstant(0.5 * fh);
  b.quad_input_upper.setConstant(1.5 * fh);
  b.omni_input_lower << -1.0, -M_PI;
  b.omni_input_upper << 1.0, M_PI;
  return b;
}

double distance(const QuadState& x_q, const OmniState& x_omni, double z_omni) {
  Eigen::Vector3d d(x_q[0] - x_omni[0], x_q[1] - x_omni[1], x_q[2] - z_omni);
  return d.norm();
}

double complementarity_residual(double eps, double f_dis, double nu) {
  return eps * (f_dis - nu);
}

Eigen::VectorXd progress_constraints(const Eigen::VectorXd& kappa,
                                     const Eigen::VectorXd& eps) {
  const int n = static_cast<int>(eps.size());
  Eigen::VectorXd r(n + 2);
  for (int k = 0; k < n; ++k) r[k] = kappa[k + 1] - kappa[k] + eps[k];
  r[n] = kappa[0] - 1.0;
  r[n + 1] = kappa[n];
  return r;
}

double ocp_objective(const Eigen::VectorXd& z, const StageLayout& layout,
                     const OcpWeights& weights) {
  double j = 0.0;
  for (int k = 0; k <= layout.N; ++k) {
    j += weights.w1 * z[layout.dt(k)];
    j += weights.w2 * z[layout.kappa(k)];
    j += weights.w3 * z.segment<kQuadNx>(layout.xq(k)).squaredNorm();
  }
  return j;
}

NlpProblem build_ocp(const ScenarioConfig& sc, int N) {
  if (N < 2) throw std::invalid_argument("stage count must be at least 2");
  const OcpBounds& b = sc.bounds;
  require_ordered(b.quad_state_lower, b.quad_state_upper, "quad state");
  require_ordered(b.omni_state_lower, b.omni_state_upper, "omni state");
  require_ordered(b.quad_input_lower, b.quad_input_upper, "quad input");
  require_ordered(b.omni_input_lower, b.omni_input_upper, "omni input");
  if (!(b.dt_min > 0.0) || !(b.dt_min <= b.dt_max) || !(b.nu_max >= 0.0)) {
    throw std::invalid_argument("inconsistent bounds: time grid / relaxation");
  }
  if (sc.comp_penalty < 0.0) {
    throw std::invalid_argument("coupling penalty must be non-negative");
  }
  require_inside(sc.x_q0, b.quad_state_lower, b.quad_state_upper,
                 "quadrotor");
  require_inside(sc.x_omni0, b.omni_state_lower, b.omni_state_upper,
                 "ground robot");

  const StageLayout L{N};
  NlpProblem p;
  p.num_vars = L.var_count();
  p.num_cons = L.con_count();

  // Variable bounds and initial guess.
  p.x_lower.setConstant(p.num_vars, -kInf);
  p.x_upper.setConstant(p.num_vars, kInf);
  p.x0.setZero(p.num_vars);
  for (int k = 0; k <= N; ++k) {
    p.x_lower.segment<kQuadNx>(L.xq(k)) = b.quad_state_lower;
    p.x_upper.segment<kQuadNx>(L.xq(k)) = b.quad_state_upper;
    p.x_lower.segment<kOmniNx>(L.xo(k)) = b.omni_state_lower;
    p.x_upper.segment<kOmniNx>(L.xo(k)) = b.omni_state_upper;
    p.x_lower[L.dt(k)] = b.dt_min;
    p.x_upper[L.dt(k)] = b.dt_max;
  }
  // The boundary rows pin stage 0 to the measured state; boxing those
  // variables as well wedges the barrier whenever a measurement sits on a
  // bound (a clamped post-gust replan does exactly that).
  p.x_lower.segment<kQuadNx + kOmniNx>(L.xq(0)).setConstant(-kInf);
  p.x_upper.segment<kQuadNx + kOmniNx>(L.xq(0)).setConstant(kInf);
  const double f_hover = sc.quad.hover_thrust_per_rotor();
  for (int k = 0; k < N; ++k) {
    p.x_lower.segment<kQuadNu>(L.uq(k)) = b.quad_input_lower;
    p.x_upper.segment<kQuadNu>(L.uq(k)) = b.quad_input_upper;
    p.x_lower.segment<kOmniNu>(L.uo(k)) = b.omni_input_lower;
    p.x_upper.segment<kOmniNu>(L.uo(k)) = b.omni_input_upper;
    p.x_lower[L.eps(k)] = 0.0;
    p.x_upper[L.eps(k)] = 1.0;
    p.x_lower[L.nu(k)] = 0.0;
    p.x_upper[L.nu(k)] = b.nu_max;
    p.x0.segment<kQuadNu>(L.uq(k)).setConstant(f_hover);
  }
  p.x0.segment<kQuadNx>(L.xq(0)) = sc.x_q0;
  p.x0.segment<kOmniNx>(L.xo(0)) = sc.x_omni0;

  // Constraint bounds: everything is an equality except the landing
  // coupling in the relaxed-inequality fallback mode.
  p.c_lower.setZero(p.num_cons);
  p.c_upper.setZero(p.num_cons);
  if (sc.comp_sigma >= 0.0) {
    for (int k = 0; k < N; ++k) {
      p.c_lower[L.row_comp(k)] = -kInf;
      p.c_upper[L.row_comp(k)] = sc.comp_sigma;
    }
  }

  const QuadCore qc{sc.quad};
  const OmniCore oc{sc.omni};
  const OcpWeights w = sc.weights;
  const QuadState xq0 = sc.x_q0;
  const OmniState xo0 = sc.x_omni0;
  const double z_omni = sc.omni.z_omni;
  const double rho = sc.comp_penalty;

  p.objective = [L, w, rho, z_omni](const Eigen::VectorXd& z) {
    double j = ocp_objective(z, L, w);
    if (rho > 0.0) {
      for (int k = 0; k < L.N; ++k) {
        const double v[7] = {z[L.xq(k)],     z[L.xq(k) + 1], z[L.xq(k) + 2],
                             z[L.xo(k)],     z[L.xo(k) + 1], z[L.eps(k)],
                             z[L.nu(k)]};
        const double c = comp_core(v, z_omni);
        j += rho * c * c;
      }
    }
    return j;
  };

  p.gradient = [L, w, rho, z_omni](const Eigen::VectorXd& z,
                                   Eigen::VectorXd& g) {
    g.setZero(z.size());
    for (int k = 0; k <= L.N; ++k) {
      g[L.dt(k)] = w.w1;
      g[L.kappa(k)] = w.w2;
      g.segment<kQuadNx>(L.xq(k)) = 2.0 * w.w3 * z.segment<kQuadNx>(L.xq(k));
    }
    if (rho > 0.0) {
      for (int k = 0; k < L.N; ++k) {
        const int gv[7] = {L.xq(k),     L.xq(k) + 1, L.xq(k) + 2, L.xo(k),
                           L.xo(k) + 1, L.eps(k),    L.nu(k)};
        Dual<double, 7> v[7];
        for (int i = 0; i < 7; ++i) v[i] = seed1<7>(z[gv[i]], i);
        const Dual<double, 7> c = comp_core(v, z_omni);
        for (int i = 0; i < 7; ++i) g[gv[i]] += rho * 2.0 * c.v * c.d[i];
      }
    }
  };

  p.constraints = [L, qc, oc, xq0, xo0, z_omni](const Eigen::VectorXd& z,
                                                Eigen::VectorXd& c) {
    const int N = L.N;
    c.resize(L.con_count());
    for (int i = 0; i < kQuadNx; ++i) c[i] = z[L.xq(0) + i] - xq0[i];
    for (int i = 0; i < kOmniNx; ++i) {
      c[kQuadNx + i] = z[L.xo(0) + i] - xo0[i];
    }
    for (int k = 0; k < N; ++k) {
      double pred_q[kQuadNx], pred_o[kOmniNx];
      rk2_heun_step<kQuadNx>(qc, z.data() + L.xq(k), z.data() + L.uq(k),
                             z[L.dt(k)], pred_q);
      rk2_heun_step<kOmniNx>(oc, z.data() + L.xo(k), z.data() + L.uo(k),
                             z[L.dt(k)], pred_o);
      const int row = L.row_defect(k);
      for (int r = 0; r < kQuadNx; ++r) {
        c[row + r] = z[L.xq(k + 1) + r] - pred_q[r];
      }
      for (int r = 0; r < kOmniNx; ++r) {
        c[row + kQuadNx + r] = z[L.xo(k + 1) + r] - pred_o[r];
      }
      const double v[7] = {z[L.xq(k)],     z[L.xq(k) + 1], z[L.xq(k) + 2],
                           z[L.xo(k)],     z[L.xo(k) + 1], z[L.eps(k)],
                           z[L.nu(k)]};
      c[L.row_comp(k)] = comp_core(v, z_omni);
      c[L.row_prog(k)] = z[L.kappa(k + 1)] - z[L.kappa(k)] + z[L.eps(k)];
    }
    c[L.row_kappa_first()] = z[L.kappa(0)] - 1.0;
    c[L.row_kappa_last()] = z[L.kappa(N)];
  };

  // Jacobian pattern; the values callback below fills the same order.
  for (int i = 0; i < kQuadNx; ++i) p.jac_pattern.emplace_back(i, L.xq(0) + i);
  for (int i = 0; i < kOmniNx; ++i) {
    p.jac_pattern.emplace_back(kQuadNx + i, L.xo(0) + i);
  }
  for (int k = 0; k < N; ++k) {
    const int row = L.row_defect(k);
    for (int r = 0; r < kQuadNx; ++r) {
      for (int j = 0; j < kQuadNx; ++j) {
        p.jac_pattern.emplace_back(row + r, L.xq(k) + j);
      }
      for (int j = 0; j < kQuadNu; ++j) {
        p.jac_pattern.emplace_back(row + r, L.uq(k) + j);
      }
      p.jac_pattern.emplace_back(row + r, L.dt(k));
      p.jac_pattern.emplace_back(row + r, L.xq(k + 1) + r);
    }
    for (int r = 0; r < kOmniNx; ++r) {
      for (int j = 0; j < kOmniNx; ++j) {
        p.jac_pattern.emplace_back(row + kQuadNx + r, L.xo(k) + j);
      }
      for (int j = 0; j < kOmniNu; ++j) {
        p.jac_pattern.emplace_back(row + kQuadNx + r, L.uo(k) + j);
      }
      p.jac_pattern.emplace_back(row + kQuadNx + r, L.dt(k));
      p.jac_pattern.emplace_back(row + kQuadNx + r, L.xo(k + 1) + r);
    }
    const int cr = L.row_comp(k);
    p.jac_pattern.emplace_back(cr, L.xq(k));
    p.jac_pattern.emplace_back(cr, L.xq(k) + 1);
    p.jac_pattern.emplace_back(cr, L.xq(k) + 2);
    p.jac_pattern.emplace_back(cr, L.xo(k));
    p.jac_pattern.emplace_back(cr, L.xo(k) + 1);
    p.jac_pattern.emplace_back(cr, L.eps(k));
    p.jac_pattern.emplace_back(cr, L.nu(k));
    const int pr = L.row_prog(k);
    p.jac_pattern.emplace_back(pr, L.kappa(k + 1));
    p.jac_pattern.emplace_back(pr, L.kappa(k));
    p.jac_pattern.emplace_back(pr, L.eps(k));
  }
  p.jac_pattern.emplace_back(L.row_kappa_first(), L.kappa(0));
  p.jac_pattern.emplace_back(L.row_kappa_last(), L.kappa(N));

  p.jacobian = [L, qc, oc, z_omni](const Eigen::VectorXd& z,
                                   std::vector<double>& vals) {
    const int N = L.N;
    std::size_t at = 0;
    for (int i = 0; i < kQuadNx + kOmniNx; ++i) vals[at++] = 1.0;
    for (int k = 0; k < N; ++k) {
      double xn[kQuadNx];
      Eigen::Matrix<double, kQuadNx, kQuadNx> aq;
      Eigen::Matrix<double, kQuadNx, kQuadNu> bq;
      Eigen::Matrix<double, kQuadNx, 1> dq;
      rk2_heun_step_with_sensitivity<kQuadNx, kQuadNu>(
          qc, z.data() + L.xq(k), z.data() + L.uq(k), z[L.dt(k)], xn, aq, bq,
          dq);
      for (int r = 0; r < kQuadNx; ++r) {
        for (int j = 0; j < kQuadNx; ++j) vals[at++] = -aq(r, j);
        for (int j = 0; j < kQuadNu; ++j) vals[at++] = -bq(r, j);
        vals[at++] = -dq[r];
        vals[at++] = 1.0;
      }
      double xo[kOmniNx];
      Eigen::Matrix<double, kOmniNx, kOmniNx> ao;
      Eigen::Matrix<double, kOmniNx, kOmniNu> bo;
      Eigen::Matrix<double, kOmniNx, 1> doo;
      rk2_heun_step_with_sensitivity<kOmniNx, kOmniNu>(
          oc, z.data() + L.xo(k), z.data() + L.uo(k), z[L.dt(k)], xo, ao, bo,
          doo);
      for (int r = 0; r < kOmniNx; ++r) {
        for (int j = 0; j < kOmniNx; ++j) vals[at++] = -ao(r, j);
        for (int j = 0; j < kOmniNu; ++j) vals[at++] = -bo(r, j);
        vals[at++] = -doo[r];
        vals[at++] = 1.0;
      }
      Dual<double, 7> v[7];
      const double raw[7] = {z[L.xq(k)],     z[L.xq(k) + 1], z[L.xq(k) + 2],
                             z[L.xo(k)],     z[L.xo(k) + 1], z[L.eps(k)],
                             z[L.nu(k)]};
      for (int i = 0; i < 7; ++i) v[i] = seed1<7>(raw[i], i);
      Dual<double, 7> cr = comp_core(v, z_omni);
      for (int i = 0; i < 7; ++i) vals[at++] = cr.d[i];
      vals[at++] = 1.0;
      vals[at++] = -1.0;
      vals[at++] = 1.0;
    }
    vals[at++] = 1.0;
    vals[at++] = 1.0;
  };

  // Hessian pattern: objective diagonal plus dense lower blocks over each
  // stage's coupled variable group.
  for (int k = 0; k <= N; ++k) {
    for (int i = 0; i < kQuadNx; ++i) {
      p.hess_pattern.emplace_back(L.xq(k) + i, L.xq(k) + i);
    }
  }
  constexpr int kNq = kQuadNx + kQuadNu + 1;   // quad defect group
  constexpr int kNo = kOmniNx + kOmniNu + 1;   // omni defect group
  for (int k = 0; k < N; ++k) {
    int gq[kNq];
    for (int i = 0; i < kQuadNx; ++i) gq[i] = L.xq(k) + i;
    for (int i = 0; i < kQuadNu; ++i) gq[kQuadNx + i] = L.uq(k) + i;
    gq[kNq - 1] = L.dt(k);
    for (int i = 0; i < kNq; ++i) {
      for (int j = 0; j <= i; ++j) p.hess_pattern.emplace_back(gq[i], gq[j]);
    }
    int go[kNo];
    for (int i = 0; i < kOmniNx; ++i) go[i] = L.xo(k) + i;
    for (int i = 0; i < kOmniNu; ++i) go[kOmniNx + i] = L.uo(k) + i;
    go[kNo - 1] = L.dt(k);
    for (int i = 0; i < kNo; ++i) {
      for (int j = 0; j <= i; ++j) p.hess_pattern.emplace_back(go[i], go[j]);
    }
    const int gc[7] = {L.xq(k),     L.xq(k) + 1, L.xq(k) + 2, L.xo(k),
                       L.xo(k) + 1, L.eps(k),    L.nu(k)};
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j <= i; ++j) p.hess_pattern.emplace_back(gc[i], gc[j]);
    }
  }

  p.hessian = [L, qc, oc, w, rho, z_omni](const Eigen::VectorXd& z,
                                          double sigma,
                                          const Eigen::VectorXd& lam,
                                          std::vector<double>& vals) {
    const int N = L.N;
    std::size_t at = 0;
    for (int k = 0; k <= N; ++k) {
      for (int i = 0; i < kQuadNx; ++i) vals[at++] = sigma * 2.0 * w.w3;
    }
    for (int k = 0; k < N; ++k) {
      {
        using D2 = Dual2<kNq>;
        D2 in[kNq], out[kQuadNx];
        for (int i = 0; i < kQuadNx; ++i) {
          in[i] = seed_hess<kNq>(z[L.xq(k) + i], i);
        }
        for (int i = 0; i < kQuadNu; ++i) {
          in[kQuadNx + i] = seed_hess<kNq>(z[L.uq(k) + i], kQuadNx + i);
        }
        in[kNq - 1] = seed_hess<kNq>(z[L.dt(k)], kNq - 1);
        rk2_heun_step<kQuadNx>(qc, in, in + kQuadNx, in[kNq - 1], out);
        const int row = L.row_defect(k);
        for (std::size_t p2 = 0; p2 < D2::kPacked; ++p2) {
          double h = 0.0;
          for (int r = 0; r < kQuadNx; ++r) {
            h -= lam[row + r] * out[r].h[p2];
          }
          vals[at++] = h;
        }
      }
      {
        using D2 = Dual2<kNo>;
        D2 in[kNo], out[kOmniNx];
        for (int i = 0; i < kOmniNx; ++i) {
          in[i] = seed_hess<kNo>(z[L.xo(k) + i], i);
        }
        for (int i = 0; i < kOmniNu; ++i) {
          in[kOmniNx + i] = seed_hess<kNo>(z[L.uo(k) + i], kOmniNx + i);
        }
        in[kNo - 1] = seed_hess<kNo>(z[L.dt(k)], kNo - 1);
        rk2_heun_step<kOmniNx>(oc, in, in + kOmniNx, in[kNo - 1], out);
        const int row = L.row_defect(k) + kQuadNx;
        for (std::size_t p2 = 0; p2 < D2::kPacked; ++p2) {
          double h = 0.0;
          for (int r = 0; r < kOmniNx; ++r) {
            h -= lam[row + r] * out[r].h[p2];
          }
          vals[at++] = h;
        }
      }
      {
        using D2 = Dual2<7>;
        D2 v[7];
        const double raw[7] = {z[L.xq(k)],     z[L.xq(k) + 1],
                               z[L.xq(k) + 2], z[L.xo(k)],
                               z[L.xo(k) + 1], z[L.eps(k)],
                               z[L.nu(k)]};
        for (int i = 0; i < 7; ++i) v[i] = seed_hess<7>(raw[i], i);
        D2 cr = comp_core(v, z_omni);
        const double lc = lam[L.row_comp(k)];
        if (rho > 0.0) {
          const D2 sq = cr * cr;
          for (std::size_t p2 = 0; p2 < D2::kPacked; ++p2) {
            vals[at++] = lc * cr.h[p2] + sigma * rho * sq.h[p2];
          }
        } else {
          for (std::size_t p2 = 0; p2 < D2::kPacked; ++p2) {
            vals[at++] = lc * cr.h[p2];
          }
        }
      }
    }
  };

  return p;
}

}  // namespace coland
