#pragma once

#include <vector>

namespace attmiss {

// Nodes and weights with sum_k w_k g(x_k) ~= E[g(X)], X ~ N(0, 1)
// (probabilists' Gauss-Hermite; weights sum to one).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Golub-Welsch eigen-decomposition of the Jacobi matrix; exact for
// polynomials of degree up to 2 * order - 1.
GaussHermite gauss_hermite(int order);

// A finite measure on the real line: sum_k weights[k] g(points[k])
// approximates (or equals) the integral of g against the measure.
// Discrete supports carry weight 1 per point (counting measure).
struct Support {
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

Support discrete_support(std::vector<double> points);

// Lebesgue measure on R approximated by Gauss-Hermite nodes centered at
// `center` and scaled by `scale`: weights are w_k * scale / phi(x_k).
Support gauss_hermite_support(double center, double scale, int order);

double normal_pdf(double x, double mean, double variance);
double normal_log_pdf(double x, double mean, double variance);

}  // namespace attmiss
