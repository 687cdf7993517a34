#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attmiss/data.hpp"
#include "attmiss/glm.hpp"
#include "attmiss/quadrature.hpp"

namespace attmiss {

// Variation-independent parametrization of f(Y, L | A, C):
//   j(alpha)  L | A=0, C       ~ N(alpha0 + alpha_c C, sigma_j_sq)
//   chi(beta) log chi(1, l | C) = beta * l
//   r(theta)  Y | A, L=0, C    ~ N(theta_r0 + theta_ra A + theta_rc C, sigma_r_sq)
//   w(omega)  log w(y, l | A, C) = omega * y * l
// so that L | A, C ~ N(alpha0 + alpha_c C + beta sigma_j_sq A, sigma_j_sq) and
// Y | L, A, C ~ N(theta_r0 + theta_ra A + theta_rc C + omega sigma_r_sq L, sigma_r_sq).
// Variances are carried on the log scale so every parameter is unconstrained.
struct ReparamParams {
  static constexpr int kSize = 9;
  enum Index { alpha0, alpha_c, log_sigma_j_sq, omega, beta, theta_r0, theta_ra, theta_rc,
               log_sigma_r_sq };

  Eigen::Matrix<double, kSize, 1> values = Eigen::Matrix<double, kSize, 1>::Zero();

  double operator[](Index i) const { return values[i]; }
  double& operator[](Index i) { return values[i]; }
  double sigma_j_sq() const;
  double sigma_r_sq() const;
  double mean_l(int a, double c) const;
  double mean_y(int a, double c, double l) const;

  static const std::array<const char*, kSize>& names();
};

// Per-record log f(y, l | a, c) for complete records and log of the
// integral over l for records with l missing. The gradient (with respect
// to `values`) is added into *grad when non-null.
double record_loglik(const ReparamParams& params, const ObservedRecord& record,
                     const GaussHermite& rule, Eigen::VectorXd* grad = nullptr);

// Mean over records of record_loglik; the integral over l uses
// Gauss-Hermite of the given order scaled to L | A, C. Throws
// Error(non_finite) naming the first record with a non-finite term.
double observed_loglik(const ReparamParams& params, const Dataset& dataset, int order = 20,
                       Eigen::VectorXd* grad = nullptr);

// Same, with the integral over l replaced by a sum over `l_support`.
double observed_loglik(const ReparamParams& params, const Dataset& dataset,
                       const Support& l_support);

struct ReparamFit {
  ReparamParams params;
  Eigen::VectorXd se;  // from the observed information; 0 for fixed entries
  double loglik = 0.0;  // mean per record
  double gradient_norm = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

// Quasi-Newton maximization of observed_loglik from `initial`, holding the
// entries flagged in `fixed` at their initial values. Throws
// Error(non_convergence) (with the objective trace in the message) if the
// gradient max-norm does not reach 1e-6.
ReparamFit fit_reparam_mle(const Dataset& dataset, const ReparamParams& initial, int order = 20,
                           const std::array<bool, ReparamParams::kSize>& fixed = {});

// Closed-form maximum likelihood from records with l observed: least squares
// of L on (A, C) and of Y on (A, C, L), variances RSS / n.
ReparamParams complete_data_mle(const Dataset& dataset);

// Draws from the family: C = N(0,1) + U(-1,1), logit pr(A=1 | C) = 0.3 C,
// (L, Y) from `params`, logit pr(R=1 | A, C, Y) = eta0 + eta1 A + eta2 C + eta3 Y.
Dataset simulate_reparam_family(const ReparamParams& params, const Eigen::Vector4d& eta,
                                std::size_t n, std::uint64_t seed);

// h(kappa) = pr(A=1 | L=0, C): logistic regression of A on (L, C) over the
// complete cases weighted by 1 / pi_hat, evaluated at L = 0.
FittedModel fit_h_kappa(const Dataset& dataset, const FittedModel& missingness);
double h_kappa(const FittedModel& model, double c);

}  // namespace attmiss
