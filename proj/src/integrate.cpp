#include "coland/integrate.hpp"

namespace coland {

Eigen::VectorXd rk2_heun_step(const DynFn& f, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u, double dt) {
  Eigen::VectorXd k1 = f(x, u);
  Eigen::VectorXd k2 = f(x + dt * k1, u);
  return x + dt * 0.5 * (k1 + k2);
}

Eigen::VectorXd rk4_step(const DynFn& f, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, double dt) {
  Eigen::VectorXd k1 = f(x, u);
  Eigen::VectorXd k2 = f(x + 0.5 * dt * k1, u);
  Eigen::VectorXd k3 = f(x + 0.5 * dt * k2, u);
  Eigen::VectorXd k4 = f(x + dt * k3, u);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace coland
