#include "attmiss/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "attmiss/error.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/random.hpp"

namespace attmiss {

ImputationDraws imputation_draws(const Dataset& dataset, int m_imputations,
                                 std::uint64_t seed) {
  if (m_imputations < 1) {
    throw Error(ErrorKind::config, "m_imputations must be at least 1");
  }
  ImputationDraws draws;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    if (dataset[i].r == 0) draws.missing_index.push_back(i);
  }
  const auto rows = static_cast<Eigen::Index>(draws.missing_index.size());
  draws.z.resize(rows, m_imputations);
  for (int k = 0; k < m_imputations; ++k) {
    Rng rng(derive_seed(seed, Stream::imputation, static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < rows; ++j) draws.z(j, k) = normal(rng);
  }
  return draws;
}

double NuisanceFits::pi_hat(const RowValues& values) const {
  return missingness ? missingness->mean(values) : 1.0;
}

bool NuisanceFits::converged() const {
  return (!missingness || missingness->fit.converged) && propensity.fit.converged &&
         confounder.fit.converged && outcome.fit.converged;
}

std::vector<std::string> check_invariants(const NuisanceFits& fits) {
  std::vector<std::string> problems;
  if (!(fits.sigma_l_sq() > 0.0)) problems.emplace_back("sigma_l_sq must be positive");
  if (!(fits.sigma_y_sq() > 0.0)) problems.emplace_back("sigma_y_sq must be positive");
  if (!(fits.pr_a1 > 0.0 && fits.pr_a1 < 1.0)) problems.emplace_back("pr_a1 must lie in (0,1)");
  const auto check = [&](const FittedModel& m, const char* name) {
    if (static_cast<std::size_t>(m.fit.coefficients.size()) != m.design.width()) {
      problems.push_back(std::string(name) + " coefficients do not match its design");
    }
  };
  if (fits.missingness) check(*fits.missingness, "missingness");
  check(fits.propensity, "propensity");
  check(fits.confounder, "confounder");
  check(fits.outcome, "outcome");
  return problems;
}

double impute_l(const FittedModel& confounder, const ObservedRecord& record, double z) {
  const double sigma = std::sqrt(confounder.fit.residual_variance.value_or(0.0));
  return confounder.mean(RowValues::of(record)) + sigma * z;
}

namespace {

// Visits every stacked row as (design row, response, weight). Complete cases
// carry weight M, each imputed copy weight 1; the stack is never materialized.
template <typename Visit>
void visit_stack(const Dataset& dataset, const FittedModel& confounder,
                 const ImputationDraws& draws, const DesignSpec& design, Eigen::VectorXd& row,
                 Visit&& visit) {
  const int m = draws.m();
  for (const auto& rec : dataset) {
    if (rec.r == 1) {
      const RowValues values = RowValues::of(rec);
      design_row(design, values, row);
      visit(values.get(design.response), static_cast<double>(m));
    }
  }
  for (std::size_t j = 0; j < draws.missing_index.size(); ++j) {
    const auto& rec = dataset[draws.missing_index[j]];
    RowValues values = RowValues::of(rec);
    for (int imp = 0; imp < m; ++imp) {
      values.l = impute_l(confounder, rec, draws.z(static_cast<Eigen::Index>(j), imp));
      design_row(design, values, row);
      visit(values.get(design.response), 1.0);
    }
  }
}

void require_stackable(const DesignSpec& design) {
  if (design.response == Column::l) {
    throw Error(ErrorKind::config, "a stacked model cannot have l as its response");
  }
}

}  // namespace

FittedModel fit_outcome_on_stack(const Dataset& dataset, const FittedModel& confounder,
                                 const ImputationDraws& draws, const DesignSpec& design) {
  require_stackable(design);
  const auto width = static_cast<Eigen::Index>(design.width());
  Eigen::VectorXd row(width);
  const auto for_each_row = [&](auto&& visit) {
    visit_stack(dataset, confounder, draws, design, row, visit);
  };

  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(width, width);
  Eigen::VectorXd xtwy = Eigen::VectorXd::Zero(width);
  double w_total = 0.0;
  for_each_row([&](double y, double w) {
    xtwx.selfadjointView<Eigen::Lower>().rankUpdate(row, w);
    xtwy += w * y * row;
    w_total += w;
  });
  xtwx = xtwx.selfadjointView<Eigen::Lower>();
  if (w_total <= static_cast<double>(width)) {
    throw Error(ErrorKind::singular_design, "fewer stacked rows than coefficients");
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
  const auto d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) {
    throw Error(ErrorKind::singular_design, "stacked outcome design is rank deficient");
  }

  FittedModel model{design, Link::identity, {}};
  model.fit.coefficients = ldlt.solve(xtwy);
  CompensatedSum wrss;
  Eigen::VectorXd score = Eigen::VectorXd::Zero(width);
  for_each_row([&](double y, double w) {
    const double e = y - row.dot(model.fit.coefficients);
    wrss.add(w * e * e);
    score += w * e * row;
  });
  model.fit.residual_variance = wrss.value() / (w_total - static_cast<double>(width));
  model.fit.gradient_norm = (score / w_total).lpNorm<Eigen::Infinity>();
  model.fit.converged = true;
  model.fit.iterations = 1;
  const double sigma2_ml = wrss.value() / w_total;
  model.fit.log_likelihood = -0.5 * w_total * (std::log(2.0 * M_PI * sigma2_ml) + 1.0);
  return model;
}

FittedModel fit_propensity_on_stack(const Dataset& dataset, const FittedModel& confounder,
                                    const ImputationDraws& draws, const DesignSpec& design) {
  require_stackable(design);
  const auto width = static_cast<Eigen::Index>(design.width());
  Eigen::VectorXd row(width);
  const auto for_each_row = [&](auto&& visit) {
    visit_stack(dataset, confounder, draws, design, row, visit);
  };
  const LogisticOptions options;

  double w_total = 0.0, w_ones = 0.0;
  for_each_row([&](double y, double w) {
    w_total += w;
    w_ones += w * y;
  });
  if (w_ones <= 0.0 || w_ones >= w_total) {
    throw Error(ErrorKind::degenerate_response, "stacked treatment indicator is constant");
  }
  const auto loglik = [&](const Eigen::VectorXd& beta) {
    CompensatedSum ll;
    for_each_row([&](double y, double w) {
      const double eta = row.dot(beta);
      ll.add(w * (y * eta - log1pexp(eta)));
    });
    return ll.value();
  };

  FittedModel model{design, Link::logit, {}};
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(width);
  double current = loglik(beta);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(width, width);
    Eigen::VectorXd score = Eigen::VectorXd::Zero(width);
    for_each_row([&](double y, double w) {
      const double p = expit(row.dot(beta));
      info.selfadjointView<Eigen::Lower>().rankUpdate(row, w * p * (1.0 - p));
      score += w * (y - p) * row;
    });
    model.fit.iterations = iter;
    model.fit.gradient_norm = (score / w_total).lpNorm<Eigen::Infinity>();
    if (model.fit.gradient_norm <= options.tolerance) {
      model.fit.converged = true;
      break;
    }
    info = info.selfadjointView<Eigen::Lower>();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const auto d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) {
      throw Error(ErrorKind::singular_design, "stacked propensity design is rank deficient");
    }
    const Eigen::VectorXd step = ldlt.solve(score);
    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    double value = loglik(next);
    while (value < current && t > 1e-8) {
      t *= 0.5;
      next = beta + t * step;
      value = loglik(next);
    }
    beta = next;
    current = value;
    if (beta.lpNorm<Eigen::Infinity>() > options.separation_bound) {
      throw Error(ErrorKind::non_convergence, "stacked propensity coefficients diverge (separation)");
    }
  }
  if (!model.fit.converged) {
    throw Error(ErrorKind::non_convergence, "stacked propensity fit did not converge");
  }
  model.fit.coefficients = beta;
  model.fit.log_likelihood = current;
  return model;
}

NuisanceFits fit_nuisances(const Dataset& dataset, const FitRecipe& recipe) {
  if (dataset.empty()) {
    throw Error(ErrorKind::config, "cannot fit nuisances on an empty dataset");
  }
  NuisanceFits fits;
  fits.m_imputations = recipe.m_imputations;
  fits.imputation_seed = recipe.imputation_seed;
  fits.pr_a1 = static_cast<double>(dataset.count_treated()) / static_cast<double>(dataset.n());
  if (!(fits.pr_a1 > 0.0 && fits.pr_a1 < 1.0)) {
    throw Error(ErrorKind::empty_arm, "both treatment arms must be present");
  }

  if (!dataset.all_observed()) {
    fits.missingness = fit_logistic(dataset, recipe.missingness);
    fits.propensity = fit_ipw_logistic(dataset, *fits.missingness, recipe.propensity);
  } else {
    fits.propensity = fit_logistic(dataset, recipe.propensity);
  }
  fits.confounder = fit_linear(complete_cases(dataset), recipe.confounder);
  const auto draws = imputation_draws(dataset, recipe.m_imputations, recipe.imputation_seed);
  fits.outcome = fit_outcome_on_stack(dataset, fits.confounder, draws, recipe.outcome);

  if (!fits.converged()) {
    throw Error(ErrorKind::non_convergence, "a nuisance fit did not converge");
  }
  return fits;
}

}  // namespace attmiss
