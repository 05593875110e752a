#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "coland/kkt.hpp"
#include "coland/nlp.hpp"

namespace coland {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIter:
      return "max_iter";
    case SolveStatus::kTimeLimit:
      return "time_limit";
    case SolveStatus::kRestorationFailed:
      return "restoration_failed";
    case SolveStatus::kStalled:
      return "stalled";
    case SolveStatus::kEvalError:
      return "eval_error";
  }
  return "unknown";
}

namespace {

// Filter line-search and barrier-update constants; the standard published
// values for filter interior-point methods.
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kGammaAlpha = 0.05;
constexpr double kSPhi = 2.3;
constexpr double kSTheta = 1.1;
constexpr double kDeltaSw = 1.0;
constexpr double kEtaPhi = 1e-8;
constexpr double kKappaEps = 10.0;
constexpr double kKappaMu = 0.2;
constexpr double kThetaMu = 1.5;
constexpr double kTauMin = 0.99;
constexpr double kSMax = 100.0;
constexpr double kKappaSoc = 0.99;
constexpr int kMaxSoc = 4;
constexpr double kKappaSigma = 1e10;
constexpr double kDwInit = 1e-4;
constexpr double kDwMin = 1e-20;
constexpr double kDwMax = 1e40;
constexpr double kKappaWPlus = 8.0;
constexpr double kKappaWPlusInit = 100.0;
constexpr double kKappaWMinus = 1.0 / 3.0;
constexpr double kKappaC = 1e-8;
constexpr double kLambdaMax = 1e3;

struct Filter {
  std::vector<std::pair<double, double>> entries;  // (theta, phi) corners
  double theta_max = kInf;

  void reset(double tmax) {
    entries.clear();
    theta_max = tmax;
  }
  bool acceptable(double theta, double phi) const {
    if (theta > theta_max) return false;
    for (const auto& [t, p] : entries) {
      if (theta >= t && phi >= p) return false;
    }
    return true;
  }
  void add(double theta, double phi) {
    entries.emplace_back((1.0 - kGammaTheta) * theta,
                         phi - kGammaPhi * theta);
  }
};

class Ipm {
 public:
  Ipm(const NlpProblem& p, const SolveSettings& s, const WarmStartData* warm)
      : p_(p), opt_(s), warm_(s.warm_start ? warm : nullptr) {}

  SolverResult run();

 private:
  bool init();
  bool eval_fc(const Eigen::VectorXd& x_full, double* f,
               Eigen::VectorXd* c) const;
  bool eval_point();
  bool eval_hessian();
  double theta(const Eigen::VectorXd& c) const { return c.lpNorm<1>(); }
  double barrier(double f, const Eigen::VectorXd& x_full) const;
  Eigen::VectorXd barrier_gradient() const;
  Eigen::VectorXd jac_transpose_times(const Eigen::VectorXd& lam) const;
  double kkt_error(double mu, double* dual_inf = nullptr,
                   double* primal_inf = nullptr,
                   double* comp = nullptr) const;
  void assemble(double dw, double dc, bool include_hess,
                const Eigen::VectorXd& sigma);
  bool factorize_with_inertia(double* dc_used);
  void compute_rhs(double dc, Eigen::VectorXd& rhs) const;
  double fraction_to_boundary(const Eigen::VectorXd& dx, double tau) const;
  bool restoration();
  double elapsed() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - t_start_)
        .count();
  }
  SolverResult finish(SolveStatus status, int iterations);

  const NlpProblem& p_;
  SolveSettings opt_;
  const WarmStartData* warm_;

  int n_ = 0;   // original variables
  int m_ = 0;   // constraints
  int ns_ = 0;  // inequality slacks
  int nt_ = 0;  // n_ + ns_
  int dim_ = 0;
  std::vector<int> slack_of_row_;
  Eigen::VectorXd lb_, ub_;
  std::vector<char> has_lb_, has_ub_;

  Eigen::VectorXd x_, lambda_, zl_, zu_;
  double mu_ = 0.1, tau_ = kTauMin;

  double f_ = 0.0;
  Eigen::VectorXd grad_, c_;
  std::vector<double> jac_vals_, hess_vals_;

  BandedLdlt kkt_;
  std::size_t idx_sigma0_ = 0, idx_jac0_ = 0, idx_slack0_ = 0, idx_dual0_ = 0;
  double dw_last_ = 0.0;
  bool zero_probe_failed_ = false;
  long factorize_calls_ = 0;

  Filter filter_;
  double theta_min_ = 0.0, theta_cap_ = kInf;
  std::chrono::steady_clock::time_point t_start_;
};

bool Ipm::eval_fc(const Eigen::VectorXd& x_full, double* f,
                  Eigen::VectorXd* c) const {
  const Eigen::VectorXd x = x_full.head(n_);
  *f = p_.objective(x);
  if (!std::isfinite(*f)) return false;
  if (m_ > 0) {
    Eigen::VectorXd raw(m_);
    p_.constraints(x, raw);
    c->resize(m_);
    for (int i = 0; i < m_; ++i) {
      const int s = slack_of_row_[i];
      (*c)[i] = s < 0 ? raw[i] - p_.c_lower[i] : raw[i] - x_full[n_ + s];
      if (!std::isfinite((*c)[i])) return false;
    }
  } else {
    c->resize(0);
  }
  return true;
}

bool Ipm::eval_point() {
  if (!eval_fc(x_, &f_, &c_)) return false;
  Eigen::VectorXd g(n_);
  p_.gradient(x_.head(n_), g);
  if (!g.allFinite()) return false;
  grad_.setZero(nt_);
  grad_.head(n_) = g;
  if (m_ > 0) {
    p_.jacobian(x_.head(n_), jac_vals_);
    for (double v : jac_vals_) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool Ipm::eval_hessian() {
  if (p_.hess_pattern.empty()) return true;
  p_.hessian(x_.head(n_), 1.0, lambda_, hess_vals_);
  for (double v : hess_vals_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Ipm::barrier(double f, const Eigen::VectorXd& x_full) const {
  double phi = f;
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i]) {
      const double d = x_full[i] - lb_[i];
      if (d <= 0.0) return kInf;
      phi -= mu_ * std::log(d);
    }
    if (has_ub_[i]) {
      const double d = ub_[i] - x_full[i];
      if (d <= 0.0) return kInf;
      phi -= mu_ * std::log(d);
    }
  }
  return phi;
}

Eigen::VectorXd Ipm::barrier_gradient() const {
  Eigen::VectorXd bg = grad_;
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i]) bg[i] -= mu_ / (x_[i] - lb_[i]);
    if (has_ub_[i]) bg[i] += mu_ / (ub_[i] - x_[i]);
  }
  return bg;
}

Eigen::VectorXd Ipm::jac_transpose_times(const Eigen::VectorXd& lam) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nt_);
  for (std::size_t k = 0; k < p_.jac_pattern.size(); ++k) {
    const auto& [row, col] = p_.jac_pattern[k];
    out[col] += jac_vals_[k] * lam[row];
  }
  for (int i = 0; i < m_; ++i) {
    const int s = slack_of_row_[i];
    if (s >= 0) out[n_ + s] -= lam[i];
  }
  return out;
}

double Ipm::kkt_error(double mu, double* dual_inf, double* primal_inf,
                      double* comp) const {
  Eigen::VectorXd rd = grad_ + jac_transpose_times(lambda_) - zl_ + zu_;
  int nb = 0;
  double zsum = 0.0;
  double comp_raw = 0.0;
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i]) {
      ++nb;
      zsum += std::abs(zl_[i]);
      comp_raw =
          std::max(comp_raw, std::abs((x_[i] - lb_[i]) * zl_[i] - mu));
    }
    if (has_ub_[i]) {
      ++nb;
      zsum += std::abs(zu_[i]);
      comp_raw =
          std::max(comp_raw, std::abs((ub_[i] - x_[i]) * zu_[i] - mu));
    }
  }
  const double lsum = m_ > 0 ? lambda_.lpNorm<1>() : 0.0;
  const double sd =
      std::max(kSMax, (lsum + zsum) / std::max(1, m_ + nb)) / kSMax;
  const double sc = nb > 0 ? std::max(kSMax, zsum / nb) / kSMax : 1.0;

  const double d = rd.lpNorm<Eigen::Infinity>() / sd;
  const double p = m_ > 0 ? c_.lpNorm<Eigen::Infinity>() : 0.0;
  const double c = comp_raw / sc;
  if (dual_inf) *dual_inf = d;
  if (primal_inf) *primal_inf = p;
  if (comp) *comp = c;
  return std::max({d, p, c});
}

void Ipm::assemble(double dw, double dc, bool include_hess,
                   const Eigen::VectorXd& sigma) {
  kkt_.set_zero();
  if (include_hess) {
    for (std::size_t k = 0; k < p_.hess_pattern.size(); ++k) {
      kkt_.add(k, hess_vals_[k]);
    }
  }
  for (int i = 0; i < nt_; ++i) kkt_.add(idx_sigma0_ + i, sigma[i] + dw);
  for (std::size_t k = 0; k < p_.jac_pattern.size(); ++k) {
    kkt_.add(idx_jac0_ + k, jac_vals_[k]);
  }
  std::size_t sl = 0;
  for (int i = 0; i < m_; ++i) {
    if (slack_of_row_[i] >= 0) kkt_.add(idx_slack0_ + sl++, -1.0);
  }
  for (int i = 0; i < m_; ++i) kkt_.add(idx_dual0_ + i, -dc);
}

bool Ipm::factorize_with_inertia(double* dc_used) {
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(nt_);
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i]) sigma[i] += zl_[i] / (x_[i] - lb_[i]);
    if (has_ub_[i]) sigma[i] += zu_[i] / (ub_[i] - x_[i]);
  }
  double dc = std::max(opt_.reg_floor, kKappaC * std::pow(mu_, 0.25));
  // When the unregularized matrix has had the wrong inertia on recent
  // iterations (typical near a degenerate complementarity corner), probing
  // dw = 0 again wastes a full factorization per iteration. Stay on the
  // decaying perturbation in that regime and retry zero periodically so dw
  // can return to zero once the iterate leaves the degenerate region.
  double dw = 0.0;
  const bool skip_zero_probe = dw_last_ > 0.0 && zero_probe_failed_ &&
                               (++factorize_calls_ % 8) != 0;
  if (skip_zero_probe) dw = std::max(kDwMin, kKappaWMinus * dw_last_);
  for (int attempt = 0; attempt < 60; ++attempt) {
    assemble(dw, dc, true, sigma);
    int pos = 0, neg = 0, zero = 0;
    const bool ok = kkt_.factorize(&pos, &neg, &zero);
    if (ok && pos == nt_ && neg == m_ && zero == 0) {
      if (dw > 0.0) {
        dw_last_ = dw;
      } else {
        zero_probe_failed_ = false;
      }
      *dc_used = dc;
      return true;
    }
    if (attempt == 0 && dw == 0.0) zero_probe_failed_ = true;
    if (!ok || zero > 0) dc = std::max(dc * 10.0, 1e-8);
    if (dw == 0.0) {
      dw = dw_last_ == 0.0 ? kDwInit
                           : std::max(kDwMin, kKappaWMinus * dw_last_);
    } else {
      dw *= dw_last_ == 0.0 ? kKappaWPlusInit : kKappaWPlus;
    }
    if (dw > kDwMax) return false;
  }
  return false;
}

void Ipm::compute_rhs(double /*dc*/, Eigen::VectorXd& rhs) const {
  rhs.resize(dim_);
  rhs.head(nt_) = -(barrier_gradient() + jac_transpose_times(lambda_));
  rhs.tail(m_) = -c_;
}

double Ipm::fraction_to_boundary(const Eigen::VectorXd& dx,
                                 double tau) const {
  double alpha = 1.0;
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i] && dx[i] < 0.0) {
      alpha = std::min(alpha, -tau * (x_[i] - lb_[i]) / dx[i]);
    }
    if (has_ub_[i] && dx[i] > 0.0) {
      alpha = std::min(alpha, tau * (ub_[i] - x_[i]) / dx[i]);
    }
  }
  return alpha;
}

bool Ipm::init() {
  n_ = p_.num_vars;
  m_ = p_.num_cons;
  slack_of_row_.assign(m_, -1);
  ns_ = 0;
  for (int i = 0; i < m_; ++i) {
    if (p_.c_upper[i] - p_.c_lower[i] > 1e-12) slack_of_row_[i] = ns_++;
  }
  nt_ = n_ + ns_;
  dim_ = nt_ + m_;

  lb_.setConstant(nt_, -kInf);
  ub_.setConstant(nt_, kInf);
  lb_.head(n_) = p_.x_lower;
  ub_.head(n_) = p_.x_upper;
  for (int i = 0; i < m_; ++i) {
    const int s = slack_of_row_[i];
    if (s >= 0) {
      lb_[n_ + s] = p_.c_lower[i];
      ub_[n_ + s] = p_.c_upper[i];
    }
  }
  has_lb_.resize(nt_);
  has_ub_.resize(nt_);
  for (int i = 0; i < nt_; ++i) {
    has_lb_[i] = std::isfinite(lb_[i]);
    has_ub_[i] = std::isfinite(ub_[i]);
  }

  // KKT pattern: Hessian block, primal diagonal, Jacobian, slack columns,
  // dual diagonal.
  std::vector<std::pair<int, int>> entries = p_.hess_pattern;
  idx_sigma0_ = entries.size();
  for (int i = 0; i < nt_; ++i) entries.emplace_back(i, i);
  idx_jac0_ = entries.size();
  for (const auto& [row, col] : p_.jac_pattern) {
    entries.emplace_back(nt_ + row, col);
  }
  idx_slack0_ = entries.size();
  for (int i = 0; i < m_; ++i) {
    if (slack_of_row_[i] >= 0) {
      entries.emplace_back(nt_ + i, n_ + slack_of_row_[i]);
    }
  }
  idx_dual0_ = entries.size();
  for (int i = 0; i < m_; ++i) entries.emplace_back(nt_ + i, nt_ + i);
  kkt_.analyze(dim_, entries, opt_.use_rcm);
  if (opt_.verbosity >= 2) {
    std::printf("    kkt dim=%d half-bandwidth=%d\n", dim_, kkt_.bandwidth());
  }

  // Primal start: user guess (or warm iterate) pushed strictly interior.
  const bool use_warm = warm_ != nullptr && !warm_->empty() &&
                        warm_->x_full.size() == nt_ &&
                        warm_->lambda.size() == m_;
  x_.resize(nt_);
  if (use_warm) {
    x_ = warm_->x_full;
  } else {
    x_.head(n_) = p_.x0;
    if (m_ > 0) {
      Eigen::VectorXd raw(m_);
      p_.constraints(p_.x0, raw);
      for (int i = 0; i < m_; ++i) {
        if (slack_of_row_[i] >= 0) x_[n_ + slack_of_row_[i]] = raw[i];
      }
    }
  }
  const double push = use_warm ? opt_.warm_bound_push : opt_.bound_push;
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i] && has_ub_[i]) {
      const double w = ub_[i] - lb_[i];
      const double pl =
          std::min(push * std::max(1.0, std::abs(lb_[i])), push * w);
      const double pu =
          std::min(push * std::max(1.0, std::abs(ub_[i])), push * w);
      x_[i] = std::clamp(x_[i], lb_[i] + pl, ub_[i] - pu);
    } else if (has_lb_[i]) {
      x_[i] = std::max(x_[i], lb_[i] + push * std::max(1.0, std::abs(lb_[i])));
    } else if (has_ub_[i]) {
      x_[i] = std::min(x_[i], ub_[i] - push * std::max(1.0, std::abs(ub_[i])));
    }
  }

  jac_vals_.assign(p_.jac_pattern.size(), 0.0);
  hess_vals_.assign(p_.hess_pattern.size(), 0.0);
  lambda_.setZero(m_);
  if (!eval_point()) return false;

  mu_ = use_warm ? opt_.warm_mu : opt_.mu_init;
  tau_ = std::max(kTauMin, 1.0 - mu_);

  zl_.setZero(nt_);
  zu_.setZero(nt_);
  for (int i = 0; i < nt_; ++i) {
    if (has_lb_[i]) zl_[i] = use_warm ? std::max(warm_->z_lower[i], 1e-12) : 1.0;
    if (has_ub_[i]) zu_[i] = use_warm ? std::max(warm_->z_upper[i], 1e-12) : 1.0;
  }

  if (use_warm) {
    lambda_ = warm_->lambda;
  } else if (m_ > 0) {
    // Least-squares multiplier estimate via the same KKT machinery with an
    // identity primal block.
    assemble(0.0, opt_.reg_floor, false, Eigen::VectorXd::Ones(nt_));
    if (kkt_.factorize()) {
      Eigen::VectorXd rhs(dim_), sol(dim_);
      rhs.head(nt_) = -(grad_ - zl_ + zu_);
      rhs.tail(m_).setZero();
      kkt_.solve_refined(rhs, sol, 5);
      Eigen::VectorXd lam = sol.tail(m_);
      if (lam.allFinite() && lam.lpNorm<Eigen::Infinity>() <= kLambdaMax) {
        lambda_ = lam;
      }
    }
  }

  const double theta0 = m_ > 0 ? theta(c_) : 0.0;
  theta_cap_ = 1e4 * std::max(1.0, theta0);
  theta_min_ = 1e-4 * std::max(1.0, theta0);
  filter_.reset(theta_cap_);
  return true;
}

bool Ipm::restoration() {
  if (m_ == 0) return false;
  const double theta_enter = theta(c_);
  if (theta_enter <= opt_.tol_kkt) return false;
  if (opt_.verbosity >= 2) {
    std::printf("    restoration enter theta=%.3e\n", theta_enter);
  }
  // If restoration cannot find an acceptable point the entry iterate is
  // returned unchanged; a failed dig for feasibility must not replace a
  // better point with a worse one.
  const Eigen::VectorXd x_enter = x_;
  auto fail = [&] {
    x_ = x_enter;
    eval_point();
    return false;
  };

  auto merit = [&](double f, const Eigen::VectorXd& c,
                   const Eigen::VectorXd& x_full) {
    (void)f;
    const double bar = barrier(0.0, x_full);
    if (!std::isfinite(bar)) return kInf;
    return 0.5 * c.squaredNorm() + bar;
  };

  for (int it = 0; it < 60; ++it) {
    if (elapsed() > opt_.time_limit) return fail();
    const double th = theta(c_);
    if (th <= 0.9 * theta_enter &&
        filter_.acceptable(th, barrier(f_, x_))) {
      for (int i = 0; i < nt_; ++i) {
        if (has_lb_[i]) {
          zl_[i] = std::clamp(mu_ / (x_[i] - lb_[i]), 1e-8, 1e8);
        }
        if (has_ub_[i]) {
          zu_[i] = std::clamp(mu_ / (ub_[i] - x_[i]), 1e-8, 1e8);
        }
      }
      return true;
    }

    // Gauss-Newton on 0.5||c||^2 plus the bound barrier, via the KKT
    // system with a unit dual regularization block.
    Eigen::VectorXd sigma = Eigen::VectorXd::Zero(nt_);
    Eigen::VectorXd bg = Eigen::VectorXd::Zero(nt_);
    for (int i = 0; i < nt_; ++i) {
      if (has_lb_[i]) {
        const double d = x_[i] - lb_[i];
        sigma[i] += mu_ / (d * d);
        bg[i] -= mu_ / d;
      }
      if (has_ub_[i]) {
        const double d = ub_[i] - x_[i];
        sigma[i] += mu_ / (d * d);
        bg[i] += mu_ / d;
      }
    }
    assemble(1e-8, 1.0, false, sigma);
    if (!kkt_.factorize()) return fail();
    Eigen::VectorXd rhs(dim_), sol(dim_);
    rhs.head(nt_) = -bg;
    rhs.tail(m_) = -c_;
    kkt_.solve_refined(rhs, sol, 5);
    Eigen::VectorXd dx = sol.head(nt_);

    const double slope = dx.dot(jac_transpose_times(c_) + bg);
    if (!(slope < 0.0)) return fail();

    const double m0 = merit(f_, c_, x_);
    double alpha = fraction_to_boundary(dx, 0.99);
    bool stepped = false;
    while (alpha > 1e-12) {
      Eigen::VectorXd xt = x_ + alpha * dx;
      double ft;
      Eigen::VectorXd ct;
      if (eval_fc(xt, &ft, &ct) &&
          merit(ft, ct, xt) <= m0 + 1e-4 * alpha * slope) {
        x_ = xt;
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (opt_.verbosity >= 2) {
      std::printf("    resto it=%d theta=%.3e alpha=%.2e slope=%.3e %s\n", it,
                  th, alpha, slope, stepped ? "step" : "NO STEP");
    }
    if (!stepped || !eval_point()) return fail();
  }
  return fail();
}

SolverResult Ipm::finish(SolveStatus status, int iterations) {
  SolverResult out;
  out.report.status = status;
  out.report.iterations = iterations;
  out.report.mu = mu_;
  out.report.wall_time = elapsed();
  out.report.objective = f_;
  kkt_error(0.0, &out.report.dual_inf, &out.report.primal_inf,
            &out.report.complementarity);
  out.warm.x_full = x_;
  out.warm.lambda = lambda_;
  out.warm.z_lower = zl_;
  out.warm.z_upper = zu_;
  out.warm.mu = mu_;
  out.x = x_.head(n_).cwiseMax(p_.x_lower).cwiseMin(p_.x_upper);
  return out;
}

SolverResult Ipm::run() {
  t_start_ = std::chrono::steady_clock::now();
  if (!init()) return finish(SolveStatus::kEvalError, 0);

  int iter = 0;
  for (;; ++iter) {
    const double e0 = kkt_error(0.0);
    if (e0 <= opt_.tol_kkt) return finish(SolveStatus::kConverged, iter);
    if (iter >= opt_.max_iter) return finish(SolveStatus::kMaxIter, iter);
    if (elapsed() > opt_.time_limit) {
      return finish(SolveStatus::kTimeLimit, iter);
    }

    // Monotone barrier reduction.
    bool mu_changed = false;
    while (mu_ > opt_.tol_kkt / 10.0 && kkt_error(mu_) <= kKappaEps * mu_) {
      mu_ = std::max(opt_.tol_kkt / 10.0,
                     std::min(kKappaMu * mu_, std::pow(mu_, kThetaMu)));
      tau_ = std::max(kTauMin, 1.0 - mu_);
      mu_changed = true;
    }
    if (mu_changed) filter_.reset(theta_cap_);

    if (!eval_hessian()) return finish(SolveStatus::kEvalError, iter);
    double dc = 0.0;
    if (!factorize_with_inertia(&dc)) {
      if (!restoration()) {
        return finish(SolveStatus::kRestorationFailed, iter);
      }
      continue;
    }

    Eigen::VectorXd rhs, sol;
    compute_rhs(dc, rhs);
    kkt_.solve_refined(rhs, sol, 8);
    Eigen::VectorXd dx = sol.head(nt_);
    Eigen::VectorXd dlam = m_ > 0 ? Eigen::VectorXd(sol.tail(m_))
                                  : Eigen::VectorXd();

    // A numerically vanishing Newton step cannot move the iterate, and the
    // convergence test at the loop top has already rejected this point, so
    // no further progress is possible from here.
    if (dx.lpNorm<Eigen::Infinity>() <=
        1e3 * std::numeric_limits<double>::epsilon() *
            std::max(1.0, x_.lpNorm<Eigen::Infinity>())) {
      return finish(SolveStatus::kStalled, iter);
    }

    const Eigen::VectorXd bg = barrier_gradient();
    const double theta_c = m_ > 0 ? theta(c_) : 0.0;
    const double phi_c = barrier(f_, x_);
    const double gphid = bg.dot(dx);

    const double alpha_max = fraction_to_boundary(dx, tau_);
    if (opt_.verbosity >= 2) {
      int blocking = -1;
      double gap = 0.0, amax = 1.0;
      for (int i = 0; i < nt_; ++i) {
        if (has_lb_[i] && dx[i] < 0.0) {
          const double a = -tau_ * (x_[i] - lb_[i]) / dx[i];
          if (a < amax) {
            amax = a;
            blocking = i;
            gap = x_[i] - lb_[i];
          }
        }
        if (has_ub_[i] && dx[i] > 0.0) {
          const double a = tau_ * (ub_[i] - x_[i]) / dx[i];
          if (a < amax) {
            amax = a;
            blocking = i;
            gap = ub_[i] - x_[i];
          }
        }
      }
      std::printf("    amax=%.2e block=%d gap=%.1e |dx|=%.2e |dlam|=%.2e\n",
                  alpha_max, blocking, gap, dx.lpNorm<Eigen::Infinity>(),
                  m_ > 0 ? dlam.lpNorm<Eigen::Infinity>() : 0.0);
    }

    double alpha_min;
    if (gphid < 0.0 && theta_c <= theta_min_) {
      alpha_min = kGammaAlpha *
                  std::min({kGammaTheta, -kGammaPhi * theta_c / gphid,
                            kDeltaSw * std::pow(theta_c, kSTheta) /
                                std::pow(-gphid, kSPhi)});
    } else if (gphid < 0.0) {
      alpha_min = kGammaAlpha *
                  std::min(kGammaTheta, -kGammaPhi * theta_c / gphid);
    } else {
      alpha_min = kGammaAlpha * kGammaTheta;
    }
    alpha_min = std::max(alpha_min, 1e-14);

    auto acceptable = [&](double th, double ph, double alpha,
                          double slope, bool* f_type) {
      *f_type = false;
      if (!filter_.acceptable(th, ph)) return false;
      const bool switching =
          slope < 0.0 && alpha * std::pow(-slope, kSPhi) >
                             kDeltaSw * std::pow(theta_c, kSTheta);
      if (theta_c <= theta_min_ && switching) {
        if (ph <= phi_c + kEtaPhi * alpha * slope) {
          *f_type = true;
          return true;
        }
        return false;
      }
      return th <= (1.0 - kGammaTheta) * theta_c ||
             ph <= phi_c - kGammaPhi * theta_c;
    };

    double alpha = alpha_max;
    bool accepted = false, f_type = false;
    Eigen::VectorXd x_new, c_new, dx_used = dx, dlam_used = dlam;
    double f_new = 0.0, alpha_used = 0.0;
    int trial = 0;
    while (alpha >= alpha_min) {
      Eigen::VectorXd xt = x_ + alpha * dx;
      double ft;
      Eigen::VectorXd ct;
      if (eval_fc(xt, &ft, &ct)) {
        const double th = m_ > 0 ? theta(ct) : 0.0;
        const double ph = barrier(ft, xt);
        if (opt_.verbosity >= 3) {
          std::printf("    try a=%.2e th=%.3e (c %.3e) ph=%.6e (c %.6e)\n",
                      alpha, th, theta_c, ph, phi_c);
        }
        if (acceptable(th, ph, alpha, gphid, &f_type)) {
          accepted = true;
          x_new = xt;
          c_new = ct;
          f_new = ft;
          alpha_used = alpha;
          break;
        }

        // Second-order correction from the first rejected trial when the
        // violation did not improve.
        if (trial == 0 && m_ > 0 && th >= theta_c) {
          Eigen::VectorXd c_soc = alpha * c_ + ct;
          double th_prev = theta_c;
          for (int soc = 0; soc < kMaxSoc; ++soc) {
            Eigen::VectorXd rhs_soc(dim_), sol_soc(dim_);
            rhs_soc.head(nt_) =
                -(barrier_gradient() + jac_transpose_times(lambda_));
            rhs_soc.tail(m_) = -c_soc;
            kkt_.solve_refined(rhs_soc, sol_soc, 8);
            Eigen::VectorXd dxs = sol_soc.head(nt_);
            const double a_soc = fraction_to_boundary(dxs, tau_);
            Eigen::VectorXd xs = x_ + a_soc * dxs;
            double fs;
            Eigen::VectorXd cs;
            if (!eval_fc(xs, &fs, &cs)) break;
            const double ths = theta(cs);
            const double phs = barrier(fs, xs);
            bool f_type_soc = false;
            if (acceptable(ths, phs, a_soc, bg.dot(dxs), &f_type_soc)) {
              accepted = true;
              f_type = f_type_soc;
              x_new = xs;
              c_new = cs;
              f_new = fs;
              alpha_used = a_soc;
              dx_used = dxs;
              dlam_used = sol_soc.tail(m_);
              break;
            }
            if (ths > kKappaSoc * th_prev) break;
            th_prev = ths;
            c_soc = a_soc * c_soc + cs;
          }
          if (accepted) break;
        }
      }
      alpha *= 0.5;
      ++trial;
    }

    if (!accepted) {
      if (opt_.verbosity >= 2) {
        std::printf("    ls_fail amin=%.2e trials=%d theta=%.3e gphid=%.3e\n",
                    alpha_min, trial, theta_c, gphid);
      }
      // Restoration minimizes infeasibility; from an already feasible
      // iterate it cannot help, so report the stall honestly instead.
      if (theta_c <= opt_.tol_kkt) {
        return finish(SolveStatus::kStalled, iter);
      }
      if (!restoration()) {
        return finish(SolveStatus::kRestorationFailed, iter);
      }
      if (!eval_point()) return finish(SolveStatus::kEvalError, iter);
      continue;
    }

    // Bound-multiplier step from the accepted primal direction.
    Eigen::VectorXd dzl = Eigen::VectorXd::Zero(nt_);
    Eigen::VectorXd dzu = Eigen::VectorXd::Zero(nt_);
    double alpha_z = 1.0;
    for (int i = 0; i < nt_; ++i) {
      if (has_lb_[i]) {
        const double d = x_[i] - lb_[i];
        dzl[i] = mu_ / d - zl_[i] - zl_[i] / d * dx_used[i];
        if (dzl[i] < 0.0) {
          alpha_z = std::min(alpha_z, -tau_ * zl_[i] / dzl[i]);
        }
      }
      if (has_ub_[i]) {
        const double d = ub_[i] - x_[i];
        dzu[i] = mu_ / d - zu_[i] + zu_[i] / d * dx_used[i];
        if (dzu[i] < 0.0) {
          alpha_z = std::min(alpha_z, -tau_ * zu_[i] / dzu[i]);
        }
      }
    }

    if (!f_type) filter_.add(theta_c, phi_c);

    x_ = x_new;
    f_ = f_new;
    c_ = c_new;
    if (m_ > 0) lambda_ += alpha_used * dlam_used;
    zl_ += alpha_z * dzl;
    zu_ += alpha_z * dzu;
    for (int i = 0; i < nt_; ++i) {
      if (has_lb_[i]) {
        const double d = x_[i] - lb_[i];
        zl_[i] = std::clamp(zl_[i], mu_ / (kKappaSigma * d),
                            kKappaSigma * mu_ / d);
      }
      if (has_ub_[i]) {
        const double d = ub_[i] - x_[i];
        zu_[i] = std::clamp(zu_[i], mu_ / (kKappaSigma * d),
                            kKappaSigma * mu_ / d);
      }
    }

    if (!eval_point()) return finish(SolveStatus::kEvalError, iter + 1);

    if (opt_.verbosity >= 1) {
      std::printf(
          "ipm %4d f=% .8e theta=%.3e e0=%.3e mu=%.1e alpha=%.2e\n", iter,
          f_, m_ > 0 ? theta(c_) : 0.0, kkt_error(0.0), mu_, alpha_used);
    }
  }
}

}  // namespace

SolverResult solve(const NlpProblem& problem, const SolveSettings& settings,
                   const WarmStartData* warm) {
  Ipm ipm(problem, settings, warm);
  return ipm.run();
}

}  // namespace coland
