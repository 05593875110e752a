#pragma once

#include <Eigen/Dense>
#include <functional>

#include "coland/dual.hpp"

namespace coland {

/// One step of Heun's method (explicit trapezoidal, order 2).
/// F has signature f(const T* x, const T* u, T* dx).
template <int NX, typename T, typename F>
void rk2_heun_step(F&& f, const T* x, const T* u, const T& dt, T* out) {
  T k1[NX], k2[NX], x1[NX];
  f(x, u, k1);
  for (int i = 0; i < NX; ++i) x1[i] = x[i] + dt * k1[i];
  f(x1, u, k2);
  for (int i = 0; i < NX; ++i) out[i] = x[i] + dt * 0.5 * (k1[i] + k2[i]);
}

/// One step of the classical fourth-order Runge-Kutta method.
template <int NX, typename T, typename F>
void rk4_step(F&& f, const T* x, const T* u, const T& dt, T* out) {
  T k1[NX], k2[NX], k3[NX], k4[NX], xt[NX];
  f(x, u, k1);
  for (int i = 0; i < NX; ++i) xt[i] = x[i] + dt * 0.5 * k1[i];
  f(xt, u, k2);
  for (int i = 0; i < NX; ++i) xt[i] = x[i] + dt * 0.5 * k2[i];
  f(xt, u, k3);
  for (int i = 0; i < NX; ++i) xt[i] = x[i] + dt * k3[i];
  f(xt, u, k4);
  for (int i = 0; i < NX; ++i) {
    out[i] = x[i] + dt * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) / 6.0;
  }
}

/// RK step plus exact Jacobians of the next state w.r.t. x, u, and dt,
/// computed with forward-mode duals. FCore must be callable with any
/// scalar type: f(const S* x, const S* u, S* dx). Stepper is one of the
/// templated steppers above instantiated for the dual scalar.
template <int NX, int NU, typename FCore, typename Stepper>
void rk_step_with_sensitivity(FCore&& f, Stepper&& stepper, const double* x,
                              const double* u, double dt, double* x_next,
                              Eigen::Matrix<double, NX, NX>& a,
                              Eigen::Matrix<double, NX, NU>& b,
                              Eigen::Matrix<double, NX, 1>& ddt) {
  constexpr std::size_t kNv = NX + NU + 1;
  using D = Dual<double, kNv>;
  D xd[NX], ud[NU], outd[NX];
  for (int i = 0; i < NX; ++i) xd[i] = seed1<kNv>(x[i], i);
  for (int i = 0; i < NU; ++i) ud[i] = seed1<kNv>(u[i], NX + i);
  D dtd = seed1<kNv>(dt, NX + NU);
  stepper(f, xd, ud, dtd, outd);
  for (int i = 0; i < NX; ++i) {
    x_next[i] = outd[i].v;
    for (int j = 0; j < NX; ++j) a(i, j) = outd[i].d[j];
    for (int j = 0; j < NU; ++j) b(i, j) = outd[i].d[NX + j];
    ddt[i] = outd[i].d[NX + NU];
  }
}

template <int NX, int NU, typename FCore>
void rk2_heun_step_with_sensitivity(FCore&& f, const double* x,
                                    const double* u, double dt, double* x_next,
                                    Eigen::Matrix<double, NX, NX>& a,
                                    Eigen::Matrix<double, NX, NU>& b,
                                    Eigen::Matrix<double, NX, 1>& ddt) {
  using D = Dual<double, NX + NU + 1>;
  rk_step_with_sensitivity<NX, NU>(
      f, [](auto&& fc, const D* xs, const D* us, const D& h, D* out) {
        rk2_heun_step<NX>(fc, xs, us, h, out);
      },
      x, u, dt, x_next, a, b, ddt);
}

template <int NX, int NU, typename FCore>
void rk4_step_with_sensitivity(FCore&& f, const double* x, const double* u,
                               double dt, double* x_next,
                               Eigen::Matrix<double, NX, NX>& a,
                               Eigen::Matrix<double, NX, NU>& b,
                               Eigen::Matrix<double, NX, 1>& ddt) {
  using D = Dual<double, NX + NU + 1>;
  rk_step_with_sensitivity<NX, NU>(
      f, [](auto&& fc, const D* xs, const D* us, const D& h, D* out) {
        rk4_step<NX>(fc, xs, us, h, out);
      },
      x, u, dt, x_next, a, b, ddt);
}

using DynFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

Eigen::VectorXd rk2_heun_step(const DynFn& f, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, double dt);
Eigen::VectorXd rk4_step(const DynFn& f, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt);

}  // namespace coland
