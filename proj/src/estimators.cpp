#include "attmiss/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "attmiss/error.hpp"
#include "attmiss/numeric.hpp"

namespace attmiss {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxExponent = 700.0;

void require_both_arms(const Dataset& dataset, const char* who) {
  const auto treated = dataset.count_treated();
  if (treated == 0 || treated == dataset.n()) {
    throw Error(ErrorKind::empty_arm, std::string(who) + ": both treatment arms are required");
  }
}

void require_all_observed(const Dataset& dataset, const char* who) {
  if (!dataset.all_observed()) {
    throw Error(ErrorKind::oracle_data_required,
                std::string(who) + " needs l observed for every record");
  }
}

double odds(double p) { return p / (1.0 - p); }

}  // namespace

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::dr: return "DR";
    case EstimatorKind::naive: return "Naive";
    case EstimatorKind::cc: return "CC";
    case EstimatorKind::ipcw: return "IPCW";
    case EstimatorKind::mcdlm: return "MCDLM";
    case EstimatorKind::full: return "Full";
    case EstimatorKind::aipw: return "AIPW";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& name) {
  std::string lower;
  for (const char ch : name) {
    if (!std::isspace(static_cast<unsigned char>(ch))) {
      lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  for (const auto kind : kAllEstimators) {
    std::string candidate = to_string(kind);
    std::transform(candidate.begin(), candidate.end(), candidate.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (candidate == lower) return kind;
  }
  throw Error(ErrorKind::config, "unknown estimator '" + name + "'");
}

std::vector<EstimatorKind> parse_estimator_list(const std::string& comma_separated) {
  std::vector<EstimatorKind> kinds;
  std::istringstream in(comma_separated);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto kind = parse_estimator(item);
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) kinds.push_back(kind);
  }
  return kinds;
}

double iota_full(double y, int a, double p, double mu0, double pr_a1, double psi) {
  if (a == 0) {
    return odds(p) * (y - mu0) / pr_a1;
  }
  return (mu0 - psi) / pr_a1;
}

ConditionalTerms cond_expectations(const ObservedRecord& record, const NuisanceFits& fits) {
  RowValues values = RowValues::of(record);
  values.l = 0.0;

  RowValues control = values;
  control.a = 0.0;
  RowValues treated = values;
  treated.a = 1.0;

  const double sigma2 = fits.sigma_l_sq();
  const double mu_l0 = fits.confounder.mean(control);
  const double mu_l1 = fits.confounder.mean(treated);

  const double p_rest = fits.propensity.linear_predictor(values);
  const double p_slope = fits.propensity.l_slope(values);
  const double m_rest = fits.outcome.linear_predictor(control);
  const double m_slope = fits.outcome.l_slope(control);

  const double exponent = p_rest + p_slope * mu_l0 + 0.5 * sigma2 * p_slope * p_slope;
  if (!(exponent < kMaxExponent)) {
    std::ostringstream msg;
    msg << "odds exponent " << exponent << " (propensity predictor " << p_rest << " + "
        << p_slope << " * " << mu_l0 << ")";
    throw Error(ErrorKind::numeric_overflow, msg.str());
  }

  ConditionalTerms terms;
  terms.e_odds = std::exp(exponent);
  terms.zeta = terms.e_odds * (m_rest + m_slope * (mu_l0 + sigma2 * p_slope));
  terms.v4_mean = m_rest + m_slope * mu_l1;
  return terms;
}

InfluenceContext make_context(const Dataset& dataset, const NuisanceFits& fits) {
  InfluenceContext ctx;
  ctx.pr_a1 = fits.pr_a1;
  const std::size_t n = dataset.n();
  ctx.pi_hat.resize(n);
  ctx.p_hat.assign(n, kNaN);
  ctx.mu_y0.assign(n, kNaN);
  ctx.terms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = dataset[i];
    const RowValues values = RowValues::of(rec);
    ctx.pi_hat[i] = fits.pi_hat(values);
    if (rec.l) {
      ctx.p_hat[i] = fits.propensity.mean(values);
      RowValues control = values;
      control.a = 0.0;
      ctx.mu_y0[i] = fits.outcome.mean(control);
    }
    ctx.terms[i] = cond_expectations(rec, fits);
  }
  check_context(dataset, ctx);
  return ctx;
}

void check_context(const Dataset& dataset, const InfluenceContext& ctx) {
  if (!(ctx.pr_a1 > 0.0 && ctx.pr_a1 < 1.0)) {
    throw Error(ErrorKind::positivity, "pr(A=1) must lie in (0,1)");
  }
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    if (!(ctx.pi_hat[i] >= kWeightFloor && ctx.pi_hat[i] <= 1.0)) {
      throw Error(ErrorKind::positivity, "record " + std::to_string(i) +
                                             ": observation probability " +
                                             std::to_string(ctx.pi_hat[i]) + " below floor");
    }
    if (dataset[i].r == 1 && !(ctx.p_hat[i] > 0.0 && ctx.p_hat[i] < 1.0)) {
      throw Error(ErrorKind::positivity,
                  "record " + std::to_string(i) + ": propensity outside (0,1)");
    }
  }
}

double conditional_iota_full(const ObservedRecord& record, const ConditionalTerms& terms,
                             double pr_a1, double psi) {
  if (record.a == 0) {
    return (record.y * terms.e_odds - terms.zeta) / pr_a1;
  }
  return (terms.v4_mean - psi) / pr_a1;
}

double iota_miss(const ObservedRecord& record, std::size_t i, const InfluenceContext& ctx,
                 double psi) {
  const double expected = conditional_iota_full(record, ctx.terms[i], ctx.pr_a1, psi);
  if (record.r == 0) {
    return expected;
  }
  const double ratio = 1.0 / ctx.pi_hat[i];
  const double full =
      iota_full(record.y, record.a, ctx.p_hat[i], ctx.mu_y0[i], ctx.pr_a1, psi);
  return ratio * full - (ratio - 1.0) * expected;
}

DrTerms dr_terms(const ObservedRecord& record, std::size_t i, const InfluenceContext& ctx) {
  const double pr1 = ctx.pr_a1;
  const double ratio = record.r == 1 ? 1.0 / ctx.pi_hat[i] : 0.0;
  const double aug = ratio - 1.0;
  const auto& t = ctx.terms[i];
  DrTerms v;
  if (record.r == 1) {
    v.v1 = record.a == 0
               ? ratio * odds(ctx.p_hat[i]) * (record.y - ctx.mu_y0[i]) / pr1
               : ratio * ctx.mu_y0[i] / pr1;
  }
  if (record.a == 0) {
    v.v2 = aug * record.y * t.e_odds / pr1;
    v.v3 = aug * t.zeta / pr1;
  } else {
    v.v4 = aug * t.v4_mean / pr1;
  }
  return v;
}

double treated_mean(const Dataset& dataset) {
  CompensatedSum sum;
  std::size_t count = 0;
  for (const auto& rec : dataset) {
    if (rec.a == 1) {
      sum.add(rec.y);
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::empty_arm, "no treated records");
  return sum.value() / static_cast<double>(count);
}

EstimateReport estimate_dr(const Dataset& dataset, const InfluenceContext& ctx) {
  require_both_arms(dataset, "DR");
  check_context(dataset, ctx);
  CompensatedSum sum;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    sum.add(dr_terms(dataset[i], i, ctx).contribution());
  }
  const double psi = sum.value() / static_cast<double>(dataset.n());
  return EstimateReport::make(EstimatorKind::dr, psi, treated_mean(dataset), dataset.n());
}

EstimateReport estimate_dr(const Dataset& dataset, const NuisanceFits& fits) {
  return estimate_dr(dataset, make_context(dataset, fits));
}

double odds_weighted_psi(const Dataset& dataset, const std::vector<double>& p_hat,
                         const std::vector<double>& weights) {
  CompensatedSum numerator;
  CompensatedSum denominator;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto& rec = dataset[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    if (rec.a == 1) {
      denominator.add(w);
    } else {
      numerator.add(w * odds(p_hat[i]) * rec.y);
    }
  }
  if (denominator.value() <= 0.0) {
    throw Error(ErrorKind::empty_arm, "no treated records carry weight");
  }
  return numerator.value() / denominator.value();
}

EstimateReport estimate_ipcw(const Dataset& dataset, const InfluenceContext& ctx) {
  require_both_arms(dataset, "IPCW");
  check_context(dataset, ctx);
  std::vector<double> weights(dataset.n(), 0.0);
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    if (dataset[i].r == 1) weights[i] = 1.0 / ctx.pi_hat[i];
  }
  const double psi = odds_weighted_psi(dataset, ctx.p_hat, weights);
  return EstimateReport::make(EstimatorKind::ipcw, psi, treated_mean(dataset),
                              dataset.count_observed());
}

EstimateReport estimate_ipcw(const Dataset& dataset, const NuisanceFits& fits) {
  return estimate_ipcw(dataset, make_context(dataset, fits));
}

EstimateReport estimate_mcdlm(const Dataset& dataset, const NuisanceFits& fits,
                              int m_imputations, std::uint64_t seed) {
  require_both_arms(dataset, "MCDLM");
  const auto draws = imputation_draws(dataset, m_imputations, seed);
  // Direct likelihood: the propensity is refitted on the imputed stack, so
  // only the confounder model and the propensity design enter.
  const auto propensity =
      fit_propensity_on_stack(dataset, fits.confounder, draws, fits.propensity.design);

  const double m = static_cast<double>(m_imputations);
  CompensatedSum numerator;
  CompensatedSum denominator;
  for (const auto& rec : dataset) {
    if (rec.r == 1) {
      if (rec.a == 1) {
        denominator.add(m);
      } else {
        numerator.add(m * odds(propensity.mean(RowValues::of(rec))) * rec.y);
      }
    }
  }
  for (std::size_t j = 0; j < draws.missing_index.size(); ++j) {
    const auto& rec = dataset[draws.missing_index[j]];
    if (rec.a == 1) {
      denominator.add(m);
      continue;
    }
    RowValues values = RowValues::of(rec);
    for (int k = 0; k < m_imputations; ++k) {
      values.l = impute_l(fits.confounder, rec, draws.z(static_cast<Eigen::Index>(j), k));
      numerator.add(odds(propensity.mean(values)) * rec.y);
    }
  }
  auto report = EstimateReport::make(EstimatorKind::mcdlm, numerator.value() / denominator.value(),
                                     treated_mean(dataset), dataset.n());
  std::ostringstream lambda;
  lambda << "stacked propensity coefficients:";
  for (Eigen::Index j = 0; j < propensity.coefficients().size(); ++j) {
    lambda << ' ' << propensity.coefficients()[j];
  }
  report.diagnostics.push_back(lambda.str());
  return report;
}

EstimateReport estimate_cc(const Dataset& dataset, const FitRecipe& recipe) {
  const Dataset cc = complete_cases(dataset);
  require_both_arms(cc, "CC");
  const auto propensity = fit_logistic(cc, recipe.propensity);
  std::vector<double> p_hat(cc.n());
  for (std::size_t i = 0; i < cc.n(); ++i) p_hat[i] = propensity.mean(RowValues::of(cc[i]));
  return EstimateReport::make(EstimatorKind::cc, odds_weighted_psi(cc, p_hat),
                              treated_mean(cc), cc.n());
}

EstimateReport estimate_naive(const Dataset& dataset, const FitRecipe& recipe) {
  require_both_arms(dataset, "Naive");
  if (recipe.naive_propensity.uses(Column::l)) {
    throw Error(ErrorKind::config, "the naive propensity design must not use l");
  }
  const auto propensity = fit_logistic(dataset, recipe.naive_propensity);
  std::vector<double> p_hat(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    p_hat[i] = propensity.mean(RowValues::of(dataset[i]));
  }
  return EstimateReport::make(EstimatorKind::naive, odds_weighted_psi(dataset, p_hat),
                              treated_mean(dataset), dataset.n());
}

EstimateReport estimate_fulldata(const Dataset& dataset, const FitRecipe& recipe) {
  require_all_observed(dataset, "Full");
  require_both_arms(dataset, "Full");
  const auto propensity = fit_logistic(dataset, recipe.propensity);
  std::vector<double> p_hat(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    p_hat[i] = propensity.mean(RowValues::of(dataset[i]));
  }
  return EstimateReport::make(EstimatorKind::full, odds_weighted_psi(dataset, p_hat),
                              treated_mean(dataset), dataset.n());
}

EstimateReport estimate_aipw_full(const Dataset& dataset, const NuisanceFits& fits) {
  require_all_observed(dataset, "AIPW");
  require_both_arms(dataset, "AIPW");
  CompensatedSum sum;
  for (const auto& rec : dataset) {
    RowValues values = RowValues::of(rec);
    const double p = fits.propensity.mean(values);
    values.a = 0.0;
    const double mu0 = fits.outcome.mean(values);
    // Psi enters only through the treated term; adding psi/pr_a1 back for the
    // treated gives the estimating-equation solution.
    sum.add(iota_full(rec.y, rec.a, p, mu0, fits.pr_a1, 0.0));
  }
  const double psi = sum.value() / static_cast<double>(dataset.n());
  return EstimateReport::make(EstimatorKind::aipw, psi, treated_mean(dataset), dataset.n());
}

EstimateReport run_estimator(EstimatorKind kind, const Dataset& dataset, const FitRecipe& recipe,
                             const NuisanceFits* fits) {
  switch (kind) {
    case EstimatorKind::cc: return estimate_cc(dataset, recipe);
    case EstimatorKind::naive: return estimate_naive(dataset, recipe);
    case EstimatorKind::full: return estimate_fulldata(dataset, recipe);
    default: break;
  }
  std::optional<NuisanceFits> own;
  if (!fits) fits = &own.emplace(fit_nuisances(dataset, recipe));
  switch (kind) {
    case EstimatorKind::dr: return estimate_dr(dataset, *fits);
    case EstimatorKind::ipcw: return estimate_ipcw(dataset, *fits);
    case EstimatorKind::mcdlm:
      return estimate_mcdlm(dataset, *fits, fits->m_imputations, fits->imputation_seed);
    case EstimatorKind::aipw: return estimate_aipw_full(dataset, *fits);
    default: break;
  }
  throw Error(ErrorKind::config, "unhandled estimator");
}

}  // namespace attmiss
