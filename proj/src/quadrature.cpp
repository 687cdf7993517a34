#include "attmiss/quadrature.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "attmiss/error.hpp"

namespace attmiss {

GaussHermite gauss_hermite(int order) {
  if (order < 1) throw Error(ErrorKind::config, "quadrature order must be at least 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermite rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    rule.nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()[k];
    const double v = eig.eigenvectors()(0, k);
    rule.weights[static_cast<std::size_t>(k)] = v * v;
  }
  // Symmetrize to remove eigen-solver noise in odd orders.
  for (int k = 0; k < order / 2; ++k) {
    const auto lo = static_cast<std::size_t>(k);
    const auto hi = static_cast<std::size_t>(order - 1 - k);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  if (order % 2 == 1) rule.nodes[static_cast<std::size_t>(order / 2)] = 0.0;
  return rule;
}

Support discrete_support(std::vector<double> points) {
  Support s;
  s.weights.assign(points.size(), 1.0);
  s.points = std::move(points);
  return s;
}

Support gauss_hermite_support(double center, double scale, int order) {
  const auto rule = gauss_hermite(order);
  Support s;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double x = rule.nodes[k];
    s.points.push_back(center + scale * x);
    s.weights.push_back(rule.weights[k] * scale / normal_pdf(x, 0.0, 1.0));
  }
  return s;
}

double normal_pdf(double x, double mean, double variance) {
  return std::exp(normal_log_pdf(x, mean, variance));
}

double normal_log_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * variance) + d * d / variance);
}

}  // namespace attmiss
