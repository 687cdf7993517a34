#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attmiss/data.hpp"
#include "attmiss/glm.hpp"

namespace attmiss {

// Designs used for each nuisance model plus the Monte Carlo settings of the
// imputation stack that fits the outcome model.
struct FitRecipe {
  DesignSpec missingness = main_effects(Column::r, {Column::a, Column::c, Column::y});
  DesignSpec propensity = main_effects(Column::a, {Column::l, Column::c});
  DesignSpec confounder = main_effects(Column::l, {Column::a, Column::y, Column::c});
  DesignSpec outcome = main_effects(Column::y, {Column::a, Column::l, Column::c});
  DesignSpec naive_propensity = main_effects(Column::a, {Column::c});
  int m_imputations = 100;
  std::uint64_t imputation_seed = 0;

  friend bool operator==(const FitRecipe&, const FitRecipe&) = default;
};

// Standard normal draws for the imputation stack: z(j, k) is the draw for
// the j-th record with missing l in imputation k. Column k comes from its
// own RNG stream, so draws do not depend on scheduling.
struct ImputationDraws {
  std::vector<std::size_t> missing_index;
  Eigen::MatrixXd z;
  int m() const { return static_cast<int>(z.cols()); }
};

ImputationDraws imputation_draws(const Dataset& dataset, int m_imputations,
                                 std::uint64_t seed);

// Fitted nuisance models:
//   missingness  pi(eta)    = pr(R=1 | A, C, Y)  logistic, all records
//   propensity   p(lambda)  = pr(A=1 | L, C)     logistic, complete cases, weights 1/pi
//   confounder   t(phi)     = L | A, Y, C        linear Gaussian, complete cases
//   outcome      m(nu)      = Y | A, L, C        linear Gaussian, imputation stack
struct NuisanceFits {
  std::optional<FittedModel> missingness;  // absent when no record is missing (pi == 1)
  FittedModel propensity;
  FittedModel confounder;
  FittedModel outcome;
  double pr_a1 = 0.5;
  int m_imputations = 0;
  std::uint64_t imputation_seed = 0;

  double pi_hat(const RowValues& values) const;
  double sigma_l_sq() const { return confounder.fit.residual_variance.value_or(0.0); }
  double sigma_y_sq() const { return outcome.fit.residual_variance.value_or(0.0); }
  const Eigen::VectorXd& lambda() const { return propensity.coefficients(); }
  const Eigen::VectorXd& phi() const { return confounder.coefficients(); }
  const Eigen::VectorXd& nu() const { return outcome.coefficients(); }
  bool converged() const;
};

// Violations of the fitted-bundle invariants (positive variances,
// 0 < pr_a1 < 1, coefficient lengths matching designs).
std::vector<std::string> check_invariants(const NuisanceFits& fits);

// Imputed value of l for a record given a standard normal draw z.
double impute_l(const FittedModel& confounder, const ObservedRecord& record, double z);

// Outcome model fitted on M stacked copies of the data in which missing l is
// filled with draws from the confounder model. Complete cases enter with
// weight M, imputed rows with weight 1, which is the stacked regression.
FittedModel fit_outcome_on_stack(const Dataset& dataset, const FittedModel& confounder,
                                 const ImputationDraws& draws, const DesignSpec& design);

// Logistic propensity maximizing the stacked likelihood, the same weights.
FittedModel fit_propensity_on_stack(const Dataset& dataset, const FittedModel& confounder,
                                    const ImputationDraws& draws, const DesignSpec& design);

NuisanceFits fit_nuisances(const Dataset& dataset, const FitRecipe& recipe);

}  // namespace attmiss
