#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attmiss/data.hpp"
#include "attmiss/nuisance.hpp"

namespace attmiss {

enum class EstimatorKind { dr, naive, cc, ipcw, mcdlm, full, aipw };

// Display order: DR, Naive, CC, IPCW, MCDLM, then the oracle benchmarks.
inline constexpr EstimatorKind kAllEstimators[] = {
    EstimatorKind::dr,    EstimatorKind::naive, EstimatorKind::cc,  EstimatorKind::ipcw,
    EstimatorKind::mcdlm, EstimatorKind::full,  EstimatorKind::aipw};

const char* to_string(EstimatorKind kind);
// Accepts the display names case-insensitively ("DR", "ipcw", ...).
// Throws Error(config) for an unknown name.
EstimatorKind parse_estimator(const std::string& name);
std::vector<EstimatorKind> parse_estimator_list(const std::string& comma_separated);

struct EstimateReport {
  EstimatorKind estimator = EstimatorKind::dr;
  double psi_hat = 0.0;    // E[Y0 | A=1]
  double theta_hat = 0.0;  // E[Y1 | A=1]
  double att_hat = 0.0;    // theta_hat - psi_hat
  std::optional<double> variance;  // variance of psi_hat
  std::size_t n_used = 0;
  std::vector<std::string> diagnostics;

  static EstimateReport make(EstimatorKind kind, double psi, double theta, std::size_t n) {
    EstimateReport r;
    r.estimator = kind;
    r.psi_hat = psi;
    r.theta_hat = theta;
    r.att_hat = theta - psi;
    r.n_used = n;
    return r;
  }
};

// Efficient influence function of Psi with full data.
double iota_full(double y, int a, double p, double mu0, double pr_a1, double psi);

// Conditional expectations given the always-observed O = (Y, A, C):
//   e_odds  = E[p/(1-p) | Y, A=0, C]
//   zeta    = E[p/(1-p) * m(0, L, C) | Y, A=0, C]
//   v4_mean = E[m(0, L, C) | Y, A=1, C]
struct ConditionalTerms {
  double e_odds = 0.0;
  double zeta = 0.0;
  double v4_mean = 0.0;
};

// Closed forms under a Gaussian confounder model and a propensity logit and
// outcome mean that are affine in l (normal moment generating function).
// Throws Error(numeric_overflow) if the odds exponent is not representable.
ConditionalTerms cond_expectations(const ObservedRecord& record, const NuisanceFits& fits);

// Per-record nuisance values that enter the missing-data influence function.
// p_hat and mu_y0 are only meaningful where l is observed (NaN otherwise).
struct InfluenceContext {
  std::vector<double> pi_hat;
  std::vector<double> p_hat;
  std::vector<double> mu_y0;  // E[Y | A=0, L, C] at the observed l
  std::vector<ConditionalTerms> terms;
  double pr_a1 = 0.5;
};

// Throws Error(positivity) if some pi_hat falls below kWeightFloor or some
// p_hat is outside (0,1).
InfluenceContext make_context(const Dataset& dataset, const NuisanceFits& fits);
void check_context(const Dataset& dataset, const InfluenceContext& ctx);

// E[iota_full | O] for record i.
double conditional_iota_full(const ObservedRecord& record, const ConditionalTerms& terms,
                             double pr_a1, double psi);

// (R/pi) iota_full - (R/pi - 1) E[iota_full | O] for record i.
double iota_miss(const ObservedRecord& record, std::size_t i, const InfluenceContext& ctx,
                 double psi);

// The four bracketed terms of the closed-form solution for record i; the
// record's contribution to psi_hat is v1 - v2 + v3 - v4.
struct DrTerms {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
  double v4 = 0.0;
  double contribution() const { return v1 - v2 + v3 - v4; }
};
DrTerms dr_terms(const ObservedRecord& record, std::size_t i, const InfluenceContext& ctx);

double treated_mean(const Dataset& dataset);

EstimateReport estimate_dr(const Dataset& dataset, const InfluenceContext& ctx);
EstimateReport estimate_dr(const Dataset& dataset, const NuisanceFits& fits);

EstimateReport estimate_ipcw(const Dataset& dataset, const InfluenceContext& ctx);
EstimateReport estimate_ipcw(const Dataset& dataset, const NuisanceFits& fits);

EstimateReport estimate_mcdlm(const Dataset& dataset, const NuisanceFits& fits,
                              int m_imputations, std::uint64_t seed);

EstimateReport estimate_cc(const Dataset& dataset, const FitRecipe& recipe);
EstimateReport estimate_naive(const Dataset& dataset, const FitRecipe& recipe);

// Oracle benchmark: requires every l observed (Error(oracle_data_required)).
EstimateReport estimate_fulldata(const Dataset& dataset, const FitRecipe& recipe);

// Full-data augmented IPW solution using the propensity and outcome models
// of `fits`. Requires every l observed.
EstimateReport estimate_aipw_full(const Dataset& dataset, const NuisanceFits& fits);

// Inverse-odds weighted mean of Y among the untreated over the treated count,
// the plug-in for E[Y0 | A=1] given fitted propensities.
double odds_weighted_psi(const Dataset& dataset, const std::vector<double>& p_hat,
                         const std::vector<double>& weights = {});

// Runs one estimator, fitting the nuisances it needs from `recipe` unless
// `fits` (already fitted with that recipe) is supplied.
EstimateReport run_estimator(EstimatorKind kind, const Dataset& dataset, const FitRecipe& recipe,
                             const NuisanceFits* fits = nullptr);

}  // namespace attmiss
