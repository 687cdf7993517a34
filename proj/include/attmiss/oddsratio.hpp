#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "attmiss/quadrature.hpp"

namespace attmiss {

// Conditioning values for the odds-ratio functions; chi(A, L | C) ignores a.
struct Cell {
  int a = 0;
  double c = 0.0;
};

// chi(u, v | cell), normalized so that chi(u0, v) = chi(u, v0) = 1.
struct OddsRatioFn {
  std::function<double(double u, double v, const Cell& cell)> eval;
  double u0 = 0.0;
  double v0 = 0.0;

  double operator()(double u, double v, const Cell& cell) const { return eval(u, v, cell); }

  static OddsRatioFn identity();
  // exp(coef * (u - u0) * (v - v0)); the Gaussian-copula case.
  static OddsRatioFn log_bilinear(double coef, double u0 = 0.0, double v0 = 0.0);
};

// Cross-product ratio of a strictly positive table over (u_points x
// v_points) normalized at (u0, v0). The table may be a joint or either
// conditional; the ratio is the same. Looking up a value outside the
// supports throws Error(config); a non-positive cell throws
// Error(undefined_odds_ratio).
OddsRatioFn odds_ratio_from_table(const Eigen::MatrixXd& table, std::vector<double> u_points,
                                  std::vector<double> v_points, double u0, double v0);

// The four variation-independent pieces of f(L, Y | A, C) plus the
// supports on which integrals over l and y are evaluated.
struct Factorization {
  OddsRatioFn chi_ly;  // (l, y | a, c)
  OddsRatioFn chi_al;  // (a, l | c)
  std::function<double(double l, double c)> baseline_l;         // f(l | a0, c)
  std::function<double(double y, int a, double c)> baseline_y;  // f(y | l0, a, c)
  Support l_support;
  Support y_support;
  int a0 = 0;
  double l0 = 0.0;
  double y0 = 0.0;
};

enum class NormalizerRoute {
  // [f(l0 | y0, A, C)]^-1 times the double integral of chi f(l | y0) f(y | l0)
  double_integral,
  // integral of chi(A, l | C) f(l | a0, C) / f(l0 | a0, C), which equals
  // 1 / f(l0 | A, C)
  marginal,
};

// Throws Error(divergent_normalizer) if an integrand or the result is not
// finite and positive.
double normalizer_K(const Factorization& f, int a, double c,
                    NormalizerRoute route = NormalizerRoute::double_integral);

// f(l_i, y_j | a, c) on the support grid; sum_ij w_i w_j f_ij = 1.
Eigen::MatrixXd reconstruct_joint(const Factorization& f, int a, double c);

// pr(A = 1 | l, c) = chi(1, l | c) h / (chi(0, l | c) (1 - h) + chi(1, l | c) h)
// with h = pr(A = 1 | l0, c).
double reconstruct_propensity(const OddsRatioFn& chi_al, double baseline_a1, double l, double c);

// A strictly positive law of (A, L, Y) on finite supports for one value of C:
// mass[a](i, j) = pr(A = a, L = l_i, Y = y_j | C).
struct DiscreteJoint {
  std::vector<double> l_points;
  std::vector<double> y_points;
  std::array<Eigen::MatrixXd, 2> mass;

  Eigen::MatrixXd conditional(int a) const;  // f(l, y | a)
  double propensity(std::size_t l_index) const;  // pr(A = 1 | l)
};

// Random strictly positive joint with the given support sizes; supports are
// 0, 1, ..., size-1 so the reference values (0, 0, 0) lie in them.
DiscreteJoint random_discrete_joint(std::size_t l_size, std::size_t y_size, std::uint64_t seed);

// Reads off the four factorization pieces of a discrete law (reference values
// must be support points).
Factorization extract_factorization(const DiscreteJoint& joint, int a0 = 0, double l0 = 0.0,
                                    double y0 = 0.0);

// Three-way table over finite (X1, X2, X3).
struct Table3 {
  std::size_t n1 = 0, n2 = 0, n3 = 0;
  std::vector<double> p;

  double& at(std::size_t i, std::size_t j, std::size_t k) { return p[(i * n2 + j) * n3 + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return p[(i * n2 + j) * n3 + k]; }
};

Table3 random_table3(std::size_t n1, std::size_t n2, std::size_t n3, std::uint64_t seed);

// Conditionals entering the identity
//   f(x1 | x2) / f(0 | x2) = sum_x3 f(x1 | x2, x3) / f(0 | x2, x3) f(x3 | x2, x1 = 0).
struct Lemma1Inputs {
  Eigen::MatrixXd x1_given_x2;                 // (x1, x2)
  std::vector<Eigen::MatrixXd> x1_given_x2x3;  // per x3: (x1, x2)
  Eigen::MatrixXd x3_given_x2_ref;             // (x3, x2) at x1 = 0
};

Lemma1Inputs lemma1_inputs(const Table3& joint);

// Largest absolute difference between the two sides over (x1, x2).
double lemma1_residual(const Lemma1Inputs& in);

// Binary L with logit pr(L=1 | A, Y, C) = phi0 + phi1 A + phi2 Y + phi3 C and
// binary Y with logit pr(Y=1 | A, C) = gamma0 + gamma1 A + gamma2 C, paired
// with a propensity whose L log odds ratio is lambda1.
struct LogisticIncompatibility {
  Eigen::Vector4d phi = Eigen::Vector4d::Zero();
  Eigen::Vector3d gamma = Eigen::Vector3d::Zero();
  double lambda1 = 0.0;
  std::vector<double> c_grid;
};

struct IncompatibilityGap {
  // sup over (a, c) of |marginal logit pr(L=1 | a, c) - best linear logit in (1, a, c)|
  double linear = 0.0;
  // sup over c of |log OR(A, L | c) - lambda1|
  double odds_ratio = 0.0;
};

IncompatibilityGap incompatibility_gap(const LogisticIncompatibility& example);

// Normal pair Y | A, C, L ~ N(. + nu2 L^3, sigma_y_sq) and
// L | A, C, Y ~ N(. + phi2 Y^2, sigma_l_sq). Two conditional densities have
// a common joint only if their log ratio separates into f(l) + g(y), i.e.
// the mixed partials of log t and log m agree; returns the sup over the grid
// of |2 phi2 y / sigma_l_sq - 3 nu2 l^2 / sigma_y_sq|.
double normal_incompatibility_gap(double phi2, double nu2, double sigma_l_sq, double sigma_y_sq,
                                  const std::vector<double>& l_grid,
                                  const std::vector<double>& y_grid);

}  // namespace attmiss
