#include "attmiss/optimize.hpp"

#include <cmath>

namespace attmiss {

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index p = x0.size();
  BfgsResult result;
  Eigen::VectorXd g(p);
  double fx = f(x0, &g);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g_new(p);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd dir = -h_inv * g;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      // Lost descent; restart from steepest descent.
      h_inv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    Eigen::VectorXd x_new;
    double f_new = fx;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + t * dir;
      f_new = f(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (iter == 0) h_inv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(p, p) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    result.iterations = iter + 1;
    result.trace.push_back(fx);
  }
  if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) result.converged = true;
  result.x = x;
  result.value = fx;
  result.gradient = g;
  return result;
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index p = x.size();
  Eigen::MatrixXd h(p, p);
  Eigen::VectorXd gp(p), gm(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    f(xp, &gp);
    f(xm, &gm);
    h.col(j) = (gp - gm) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace attmiss
