#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attmiss/data.hpp"

namespace attmiss {

enum class Column { y, a, c, l, r };

const char* column_name(Column column);

// A model term is a product of one or more columns; main effects are
// single-column terms.
using Term = std::vector<Column>;

// Response plus an ordered list of terms, optionally with an intercept.
// Every term is linear in each column it contains, so a design that uses `l`
// is affine in l for fixed values of the other columns.
struct DesignSpec {
  Column response = Column::y;
  std::vector<Term> terms;
  bool intercept = true;

  std::size_t width() const { return terms.size() + (intercept ? 1 : 0); }
  bool uses(Column column) const;
  std::string term_name(std::size_t coefficient) const;
  std::string formula() const;

  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

// response ~ 1 + covariates (main effects only).
DesignSpec main_effects(Column response, std::initializer_list<Column> covariates);

// Values of every column for a single row; used to evaluate designs at
// counterfactual or imputed inputs.
struct RowValues {
  double y = 0.0;
  double a = 0.0;
  double c = 0.0;
  double l = 0.0;
  double r = 0.0;

  double get(Column column) const;
  static RowValues of(const ObservedRecord& record);
};

void design_row(const DesignSpec& design, const RowValues& values, Eigen::Ref<Eigen::VectorXd> out);
Eigen::VectorXd design_row(const DesignSpec& design, const RowValues& values);

// Rows of the design for every record. Throws Error(config) if the design
// uses `l` and some record has it missing.
Eigen::MatrixXd design_matrix(const Dataset& dataset, const DesignSpec& design);
Eigen::VectorXd response_vector(const Dataset& dataset, const DesignSpec& design);

struct FitResult {
  Eigen::VectorXd coefficients;             // intercept first when present
  std::optional<double> residual_variance;  // linear fits only
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;  // max-norm of the weight-normalized score
};

struct LogisticOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  double separation_bound = 30.0;
};

// Weighted Bernoulli maximum likelihood with logit link by damped Newton
// (IRLS) with step halving. `weights` may be empty for an unweighted fit.
// Convergence is declared when the score divided by the total weight has
// max-norm at most `tolerance`.
// Throws Error(degenerate_response) when the response is constant,
// Error(non_convergence) when a coefficient leaves the separation bound and
// Error(singular_design) for rank-deficient designs.
FitResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& weights = {},
                       const LogisticOptions& options = {},
                       const std::vector<std::string>& term_names = {});

// Weighted least squares. residual_variance = WRSS / (sum(w) - p).
// Throws Error(singular_design) on rank deficiency.
FitResult fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& weights = {});

enum class Link { logit, identity };

// A fit bound to the design that produced it, so it can be evaluated at
// arbitrary row values.
struct FittedModel {
  DesignSpec design;
  Link link = Link::identity;
  FitResult fit;

  double linear_predictor(const RowValues& values) const;
  double mean(const RowValues& values) const;
  // Coefficient of l in the linear predictor at `values` (zero when the
  // design does not use l); the predictor is lp(l=0) + slope * l.
  double l_slope(const RowValues& values) const;
  const Eigen::VectorXd& coefficients() const { return fit.coefficients; }
};

FittedModel fit_logistic(const Dataset& dataset, const DesignSpec& design,
                         const Eigen::VectorXd& weights = {});
FittedModel fit_linear(const Dataset& dataset, const DesignSpec& design,
                       const Eigen::VectorXd& weights = {});

inline constexpr double kWeightFloor = 1e-6;

// Logistic fit on the complete cases weighted by 1 / pi_hat, where pi_hat is
// the fitted missingness model. Throws Error(positivity) if any complete
// case has pi_hat below kWeightFloor.
FittedModel fit_ipw_logistic(const Dataset& dataset, const FittedModel& missingness,
                             const DesignSpec& design);

}  // namespace attmiss
