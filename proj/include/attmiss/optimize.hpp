#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace attmiss {

// Objective value at x; writes the gradient into *grad when it is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
  double gradient_tolerance = 1e-6;  // max-norm
  int max_iterations = 500;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective value after each iteration
};

// Quasi-Newton minimization with an inverse-Hessian BFGS update and a
// backtracking Armijo line search. The update is skipped when the curvature
// condition fails, which keeps the approximation positive definite.
BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

// Central-difference Jacobian of a gradient (i.e. a Hessian), symmetrized.
Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double step = 1e-5);

}  // namespace attmiss
