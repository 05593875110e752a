#include "coland/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "coland/integrate.hpp"

namespace coland {
namespace {

struct Interp {
  int k;         // stage whose input is held
  double alpha;  // blend toward stage k + 1, in [0, 1)
};

Interp locate(const std::vector<double>& t, double query) {
  const int n = static_cast<int>(t.size()) - 1;
  auto it = std::upper_bound(t.begin(), t.end(), query);
  int k = static_cast<int>(it - t.begin()) - 1;
  k = std::clamp(k, 0, n - 1);
  const double span = t[k + 1] - t[k];
  const double alpha =
      span > 0.0 ? std::clamp((query - t[k]) / span, 0.0, 1.0) : 0.0;
  return {k, alpha};
}

/// Per-step data of one tracking problem. Variables are laid out stagewise
/// as [x_k, u_k] with the terminal state last; constraints are the initial
/// pin followed by one defect block per stage.
template <int NX, int NU>
struct TrackingData {
  int horizon = 0;
  double step = 0.0;
  Eigen::Matrix<double, NX, 1> x_init;
  std::vector<Eigen::Matrix<double, NX, 1>> x_ref;  // horizon + 1
  std::vector<Eigen::Matrix<double, NU, 1>> u_ref;  // horizon
  Eigen::Matrix<double, NX, 1> q, p;
  Eigen::Matrix<double, NU, 1> r;
};

constexpr int var_x(int k, int nx, int nu) { return k * (nx + nu); }
constexpr int var_u(int k, int nx, int nu) { return k * (nx + nu) + nx; }

/// Measurements may violate the state box slightly (model mismatch, wind);
/// pull them just inside so the one-step return to the box stays feasible.
Eigen::VectorXd soft_clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi) {
  Eigen::VectorXd out = x;
  for (int i = 0; i < x.size(); ++i) {
    const double l = lo[i], h = hi[i];
    if (std::isfinite(l) && std::isfinite(h)) {
      const double m = 1e-3 * (h - l);
      out[i] = std::clamp(out[i], l + m, h - m);
    } else if (std::isfinite(l)) {
      out[i] = std::max(out[i], l);
    } else if (std::isfinite(h)) {
      out[i] = std::min(out[i], h);
    }
  }
  return out;
}

template <int NX, int NU, typename Core>
NlpProblem build_tracking_nlp(std::shared_ptr<TrackingData<NX, NU>> d,
                              const TrackerConfig& cfg, Core core) {
  const int h = d->horizon;
  const int nv = h * (NX + NU) + NX;
  const int mc = NX * (h + 1);

  NlpProblem nlp;
  nlp.num_vars = nv;
  nlp.num_cons = mc;
  nlp.x_lower.resize(nv);
  nlp.x_upper.resize(nv);
  nlp.x0.resize(nv);
  for (int k = 0; k <= h; ++k) {
    if (k == 0) {
      // The initial pin fixes these variables; a box on top of it wedges
      // the barrier whenever the measurement sits on a bound.
      nlp.x_lower.segment(var_x(0, NX, NU), NX).setConstant(-kInf);
      nlp.x_upper.segment(var_x(0, NX, NU), NX).setConstant(kInf);
    } else {
      nlp.x_lower.segment(var_x(k, NX, NU), NX) = cfg.x_lower;
      nlp.x_upper.segment(var_x(k, NX, NU), NX) = cfg.x_upper;
    }
    nlp.x0.segment(var_x(k, NX, NU), NX) = d->x_ref[k];
    if (k < h) {
      nlp.x_lower.segment(var_u(k, NX, NU), NU) = cfg.u_lower;
      nlp.x_upper.segment(var_u(k, NX, NU), NU) = cfg.u_upper;
      nlp.x0.segment(var_u(k, NX, NU), NU) = d->u_ref[k];
    }
  }
  nlp.x0.segment(var_x(0, NX, NU), NX) = d->x_init;
  nlp.c_lower = Eigen::VectorXd::Zero(mc);
  nlp.c_upper = Eigen::VectorXd::Zero(mc);

  nlp.objective = [d](const Eigen::VectorXd& x) {
    double j = 0.0;
    for (int k = 0; k <= d->horizon; ++k) {
      const auto& w = k < d->horizon ? d->q : d->p;
      Eigen::Matrix<double, NX, 1> ex =
          x.template segment<NX>(var_x(k, NX, NU)) - d->x_ref[k];
      j += ex.dot(w.cwiseProduct(ex));
      if (k < d->horizon) {
        Eigen::Matrix<double, NU, 1> eu =
            x.template segment<NU>(var_u(k, NX, NU)) - d->u_ref[k];
        j += eu.dot(d->r.cwiseProduct(eu));
      }
    }
    return j;
  };
  nlp.gradient = [d](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.setZero(x.size());
    for (int k = 0; k <= d->horizon; ++k) {
      const auto& w = k < d->horizon ? d->q : d->p;
      g.segment(var_x(k, NX, NU), NX) =
          2.0 * w.cwiseProduct(x.segment(var_x(k, NX, NU), NX) - d->x_ref[k]);
      if (k < d->horizon) {
        g.segment(var_u(k, NX, NU), NU) =
            2.0 *
            d->r.cwiseProduct(x.segment(var_u(k, NX, NU), NU) - d->u_ref[k]);
      }
    }
  };
  nlp.constraints = [d, core](const Eigen::VectorXd& x, Eigen::VectorXd& c) {
    c.resize(NX * (d->horizon + 1));
    c.head(NX) = x.head(NX) - d->x_init;
    double next[NX];
    for (int k = 0; k < d->horizon; ++k) {
      rk4_step<NX>(core, x.data() + var_x(k, NX, NU),
                   x.data() + var_u(k, NX, NU), d->step, next);
      for (int i = 0; i < NX; ++i) {
        c[NX + k * NX + i] = x[var_x(k + 1, NX, NU) + i] - next[i];
      }
    }
  };

  for (int i = 0; i < NX; ++i) nlp.jac_pattern.emplace_back(i, i);
  for (int k = 0; k < h; ++k) {
    for (int i = 0; i < NX; ++i) {
      const int row = NX + k * NX + i;
      for (int j = 0; j < NX; ++j) {
        nlp.jac_pattern.emplace_back(row, var_x(k, NX, NU) + j);
      }
      for (int j = 0; j < NU; ++j) {
        nlp.jac_pattern.emplace_back(row, var_u(k, NX, NU) + j);
      }
      nlp.jac_pattern.emplace_back(row, var_x(k + 1, NX, NU) + i);
    }
  }
  nlp.jacobian = [d, core](const Eigen::VectorXd& x, std::vector<double>& v) {
    int pos = 0;
    for (int i = 0; i < NX; ++i) v[pos++] = 1.0;
    double next[NX];
    Eigen::Matrix<double, NX, NX> a;
    Eigen::Matrix<double, NX, NU> b;
    Eigen::Matrix<double, NX, 1> ddt;
    for (int k = 0; k < d->horizon; ++k) {
      rk4_step_with_sensitivity<NX, NU>(core, x.data() + var_x(k, NX, NU),
                                        x.data() + var_u(k, NX, NU), d->step,
                                        next, a, b, ddt);
      for (int i = 0; i < NX; ++i) {
        for (int j = 0; j < NX; ++j) v[pos++] = -a(i, j);
        for (int j = 0; j < NU; ++j) v[pos++] = -b(i, j);
        v[pos++] = 1.0;
      }
    }
  };

  // Gauss-Newton Hessian: the exact (diagonal) objective curvature with the
  // constraint curvature dropped, so each interior-point iteration takes a
  // Gauss-Newton step on the tracking residuals.
  for (int i = 0; i < nv; ++i) nlp.hess_pattern.emplace_back(i, i);
  nlp.hessian = [d](const Eigen::VectorXd&, double sigma,
                    const Eigen::VectorXd&, std::vector<double>& v) {
    int pos = 0;
    for (int k = 0; k <= d->horizon; ++k) {
      const auto& w = k < d->horizon ? d->q : d->p;
      for (int i = 0; i < NX; ++i) v[pos++] = 2.0 * sigma * w[i];
      if (k < d->horizon) {
        for (int i = 0; i < NU; ++i) v[pos++] = 2.0 * sigma * d->r[i];
      }
    }
  };
  return nlp;
}

template <int NX, int NU, typename Core>
MpcResult run_tracking(std::shared_ptr<TrackingData<NX, NU>> d,
                       const TrackerConfig& cfg, Core core,
                       WarmStartData& warm, double& warm_mu, bool& has_warm) {
  NlpProblem nlp = build_tracking_nlp<NX, NU>(d, cfg, core);

  SolveSettings st;
  st.tol_kkt = 1e-8;
  st.max_iter = 120;
  st.mu_init = 1e-2;
  st.bound_push = 1e-3;
  const bool use_warm = has_warm && warm.x_full.size() == nlp.num_vars &&
                        warm.lambda.size() == nlp.num_cons;
  if (use_warm) {
    st.warm_start = true;
    st.warm_mu = std::max(warm_mu, 1e-9);
    st.warm_bound_push = 1e-9;
  }
  SolverResult res = solve(nlp, st, use_warm ? &warm : nullptr);
  if (!res.report.converged() && use_warm) {
    // A warm iterate parked hard against an active bound occasionally
    // stalls the filter; a cold solve of the same tiny problem is cheap
    // and reliable, so rescue before degrading.
    st.warm_start = false;
    res = solve(nlp, st, nullptr);
  }

  MpcResult out;
  out.x_pred.resize(NX, d->horizon + 1);
  out.u_seq.resize(NU, d->horizon);
  out.status = res.report.status;
  out.iterations = res.report.iterations;
  if (res.report.converged()) {
    out.u = res.x.segment(var_u(0, NX, NU), NU);
    out.cost = res.report.objective;
    for (int k = 0; k <= d->horizon; ++k) {
      out.x_pred.col(k) = res.x.segment(var_x(k, NX, NU), NX);
      if (k < d->horizon) {
        out.u_seq.col(k) = res.x.segment(var_u(k, NX, NU), NU);
      }
    }
    warm = std::move(res.warm);
    warm_mu = std::max(res.report.mu, 1e-9);
    has_warm = true;
  } else {
    out.degraded = true;
    out.u = d->u_ref[0];
    out.cost = kInf;
    for (int k = 0; k <= d->horizon; ++k) {
      out.x_pred.col(k) = d->x_ref[k];
      if (k < d->horizon) out.u_seq.col(k) = d->u_ref[k];
    }
    has_warm = false;  // a failed iterate is not worth restarting from
  }
  for (int i = 0; i < NU; ++i) {
    out.u[i] = std::clamp(out.u[i], cfg.u_lower[i], cfg.u_upper[i]);
  }
  return out;
}

}  // namespace

ReferenceSample sample_reference(const LandingPlan& plan, double t,
                                 double hover_total_thrust) {
  if (plan.stages.size() < 2 || plan.t.size() != plan.stages.size()) {
    throw std::invalid_argument("sample_reference: plan has no trajectory");
  }
  ReferenceSample s;
  if (t >= plan.t.back()) {
    // Past the end the docked pair keeps cruising at the matched terminal
    // velocity; holding position instead would make the reference
    // inconsistent (nonzero velocity, frozen position).
    const PlanStage& last = plan.stages.back();
    const double past = t - plan.t.back();
    s.quad_state.head<3>() = last.x_q.head<3>() + past * last.x_q.segment<3>(6);
    s.quad_state.tail<3>() = last.x_q.segment<3>(6);
    s.quad_input << hover_total_thrust, 0.0, 0.0, last.x_q[5];
    s.omni_pos = last.x_omni.head<2>() + past * last.x_omni.tail<2>();
    s.omni_vel = last.x_omni.tail<2>();
    return s;
  }
  const Interp w = locate(plan.t, std::max(t, plan.t.front()));
  const PlanStage& a = plan.stages[w.k];
  const PlanStage& b = plan.stages[w.k + 1];
  s.quad_state.head<3>() =
      (1.0 - w.alpha) * a.x_q.head<3>() + w.alpha * b.x_q.head<3>();
  s.quad_state.tail<3>() =
      (1.0 - w.alpha) * a.x_q.segment<3>(6) + w.alpha * b.x_q.segment<3>(6);
  s.quad_input << a.u_q.sum(), a.x_q[3], a.x_q[4], a.x_q[5];
  s.omni_pos =
      (1.0 - w.alpha) * a.x_omni.head<2>() + w.alpha * b.x_omni.head<2>();
  s.omni_vel = a.x_omni.tail<2>();
  return s;
}

TrackerConfig TrackerConfig::quad_defaults(const QuadParams& quad,
                                           const OcpBounds& bounds) {
  TrackerConfig c;
  c.model = TrackerModel::kReducedQuad;
  c.horizon = 20;
  c.rate = 100.0;
  c.q.resize(kReducedNx);
  c.q << 10.0, 10.0, 10.0, 1.0, 1.0, 1.0;
  c.r = Eigen::VectorXd::Constant(kReducedNu, 0.1);
  c.p = 5.0 * c.q;
  c.x_lower.resize(kReducedNx);
  c.x_upper.resize(kReducedNx);
  c.x_lower << bounds.quad_state_lower.head<3>(),
      bounds.quad_state_lower.segment<3>(6);
  c.x_upper << bounds.quad_state_upper.head<3>(),
      bounds.quad_state_upper.segment<3>(6);
  c.u_lower.resize(kReducedNu);
  c.u_upper.resize(kReducedNu);
  c.u_lower << bounds.quad_input_lower.sum(),
      bounds.quad_state_lower.segment<3>(3);
  c.u_upper << bounds.quad_input_upper.sum(),
      bounds.quad_state_upper.segment<3>(3);
  (void)quad;
  return c;
}

TrackerConfig TrackerConfig::omni_defaults(const OcpBounds& bounds) {
  TrackerConfig c;
  c.model = TrackerModel::kOmniKinematic;
  c.horizon = 10;
  c.rate = 10.0;
  c.q = Eigen::VectorXd::Constant(2, 10.0);
  c.r = Eigen::VectorXd::Constant(2, 0.1);
  c.p = 5.0 * c.q;
  c.x_lower = bounds.omni_state_lower.head<2>();
  c.x_upper = bounds.omni_state_upper.head<2>();
  c.u_lower = bounds.omni_state_lower.tail<2>();
  c.u_upper = bounds.omni_state_upper.tail<2>();
  return c;
}

Tracker::Tracker(TrackerConfig config, const QuadParams& quad)
    : cfg_(std::move(config)), quad_(quad) {
  const int nx = cfg_.model == TrackerModel::kReducedQuad ? kReducedNx : 2;
  const int nu = cfg_.model == TrackerModel::kReducedQuad ? kReducedNu : 2;
  if (cfg_.horizon < 1 || cfg_.rate <= 0.0) {
    throw std::invalid_argument("tracker: horizon and rate must be positive");
  }
  if (cfg_.q.size() != nx || cfg_.p.size() != nx || cfg_.r.size() != nu ||
      cfg_.x_lower.size() != nx || cfg_.x_upper.size() != nx ||
      cfg_.u_lower.size() != nu || cfg_.u_upper.size() != nu) {
    throw std::invalid_argument("tracker: weight or bound size mismatch");
  }
}

MpcResult Tracker::mpc_step(const Eigen::VectorXd& x_now,
                            const LandingPlan& plan, double t) {
  const double h = 1.0 / cfg_.rate;
  const double hover = quad_.mass * quad_.gravity;
  if (cfg_.model == TrackerModel::kReducedQuad) {
    if (x_now.size() != kReducedNx) {
      throw std::invalid_argument("tracker: expected a 6-dim reduced state");
    }
    auto d = std::make_shared<TrackingData<kReducedNx, kReducedNu>>();
    d->horizon = cfg_.horizon;
    d->step = h;
    d->x_init = soft_clamp(x_now, cfg_.x_lower, cfg_.x_upper);
    d->q = cfg_.q;
    d->r = cfg_.r;
    d->p = cfg_.p;
    d->x_ref.resize(cfg_.horizon + 1);
    d->u_ref.resize(cfg_.horizon);
    for (int k = 0; k <= cfg_.horizon; ++k) {
      ReferenceSample s = sample_reference(plan, t + k * h, hover);
      d->x_ref[k] = s.quad_state;
      if (k < cfg_.horizon) d->u_ref[k] = s.quad_input;
    }
    const QuadParams qp = quad_;
    auto core = [qp](const auto* x, const auto* u, auto* dx) {
      reduced_quad_core(x, u, qp, dx);
    };
    return run_tracking<kReducedNx, kReducedNu>(d, cfg_, core, warm_, warm_mu_,
                                                has_warm_);
  }
  if (x_now.size() != 2) {
    throw std::invalid_argument("tracker: expected a 2-dim position state");
  }
  auto d = std::make_shared<TrackingData<2, 2>>();
  d->horizon = cfg_.horizon;
  d->step = h;
  d->x_init = soft_clamp(x_now, cfg_.x_lower, cfg_.x_upper);
  d->q = cfg_.q;
  d->r = cfg_.r;
  d->p = cfg_.p;
  d->x_ref.resize(cfg_.horizon + 1);
  d->u_ref.resize(cfg_.horizon);
  for (int k = 0; k <= cfg_.horizon; ++k) {
    ReferenceSample s = sample_reference(plan, t + k * h, hover);
    d->x_ref[k] = s.omni_pos;
    if (k < cfg_.horizon) d->u_ref[k] = s.omni_vel;
  }
  auto core = [](const auto* x, const auto* u, auto* dx) {
    omni_kinematic_core(x, u, dx);
  };
  return run_tracking<2, 2>(d, cfg_, core, warm_, warm_mu_, has_warm_);
}

}  // namespace coland
