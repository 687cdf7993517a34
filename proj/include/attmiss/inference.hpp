#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "attmiss/data.hpp"
#include "attmiss/estimators.hpp"
#include "attmiss/nuisance.hpp"

namespace attmiss {

// Nuisance parameter vector Xi = (eta, lambda, phi, sigma_l_sq, nu); eta is
// absent when no record is missing.
struct ScoreBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

std::vector<ScoreBlock> score_blocks(const NuisanceFits& fits);
Eigen::VectorXd pack_parameters(const NuisanceFits& fits);
NuisanceFits unpack_parameters(const NuisanceFits& like, const Eigen::VectorXd& xi);

// Per-record estimating functions at the fitted nuisances:
//   Q_R = (R - pi) x_r                 missingness
//   Q_A = R / pi (A - p) x_a           propensity
//   Q_L = R (L - x_t phi) x_t          confounder mean
//   Q_S = R [(L - x_t phi)^2 k - s2]   confounder variance, k = n_cc / (n_cc - dim phi)
//   Q_Y = R (Y - x_m nu) x_m + (1 - R) mean_k (Y - x_mk nu) x_mk   stacked outcome
// with x_mk built from the imputed l_k = x_t phi + sqrt(s2) z_k, and
// z = iota_miss(psi).
struct ScoreStack {
  Eigen::MatrixXd q;  // n x dim(Xi)
  Eigen::VectorXd z;
  std::vector<ScoreBlock> blocks;
};

ScoreStack score_stack(const Dataset& dataset, const NuisanceFits& fits, double psi);

// Empirical means of the derivatives of z (row vector, d/dXi) and of Q
// (dim x dim), plus the mean of dz/dpsi.
struct ScoreDerivatives {
  Eigen::RowVectorXd dz;
  Eigen::MatrixXd dq;
  double dz_dpsi = -1.0;
};

ScoreDerivatives analytic_derivatives(const Dataset& dataset, const NuisanceFits& fits, double psi);
ScoreDerivatives fd_derivatives(const Dataset& dataset, const NuisanceFits& fits, double psi,
                                double step = 1e-5);

enum class DerivativeMethod { analytic, finite_difference };

struct VarianceReport {
  double sandwich_var = 0.0;
  std::optional<double> bootstrap_var;
  std::optional<std::pair<double, double>> bootstrap_ci;  // percentile 95%
  std::size_t replicates = 0;
  std::size_t dropped = 0;
};

// var = P_n[V^2] / (n (P_n dz/dpsi)^2) with V = z - D H^-1 Q. Q may have no
// columns (nuisances treated as known). Throws Error(singular_information)
// naming the block whose diagonal of H is singular.
double sandwich_from_scores(const Eigen::VectorXd& z, const Eigen::MatrixXd& q, double dz_dpsi,
                            const Eigen::RowVectorXd& dz, const Eigen::MatrixXd& dq,
                            const std::vector<ScoreBlock>& blocks = {});

// Variance of psi_hat for the closed-form doubly robust estimator.
VarianceReport sandwich_variance(const Dataset& dataset, const NuisanceFits& fits, double psi_hat,
                                 DerivativeMethod method = DerivativeMethod::analytic);

// Row indices for bootstrap replicate b (sampling with replacement).
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b);
Dataset resample(const Dataset& dataset, const std::vector<std::size_t>& indices);

// Statistic on each of b_replicates resamples. A replicate whose statistic
// throws attmiss::Error is dropped; more than 10% dropped throws
// Error(degenerate_bootstrap). Requires b_replicates >= 50.
struct BootstrapDraws {
  std::vector<std::optional<double>> values;  // by replicate, nullopt if dropped
  std::size_t dropped = 0;
};

BootstrapDraws bootstrap_draws(const Dataset& dataset,
                               const std::function<double(const Dataset&)>& statistic,
                               std::size_t b_replicates, std::uint64_t seed, int threads = 1);

// Variance (n - 1 denominator) and percentile interval of the kept draws.
VarianceReport summarize_bootstrap(const BootstrapDraws& draws);

// Bootstrap of psi_hat for `kind`, refitting every nuisance on each resample.
VarianceReport bootstrap(const Dataset& dataset, EstimatorKind kind, const FitRecipe& recipe,
                         std::size_t b_replicates, std::uint64_t seed, int threads = 1);

}  // namespace attmiss
