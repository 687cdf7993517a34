#include <doctest.h>

#include <cmath>

#include "attmiss/error.hpp"
#include "attmiss/estimators.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/simengine.hpp"
#include "../support/oracles.hpp"

using namespace attmiss;

namespace {

NuisanceFits listed_fits() {
  // The rounded values listed for scenario 1, with the marginal variance 0.43.
  const FitRecipe recipe;
  NuisanceFits fits;
  fits.propensity = {recipe.propensity, Link::logit, {}};
  fits.propensity.fit.coefficients = Eigen::Vector3d(-0.42, 0.5, 0.36);
  fits.confounder = {recipe.confounder, Link::identity, {}};
  fits.confounder.fit.coefficients = Eigen::Vector4d(-0.23, 0.058, 0.41, 0.016);
  fits.confounder.fit.residual_variance = 0.43;
  fits.outcome = {recipe.outcome, Link::identity, {}};
  fits.outcome.fit.coefficients = Eigen::Vector4d(0.27, 0.275, 0.49, 0.23);
  fits.outcome.fit.residual_variance = 0.4;
  fits.pr_a1 = 0.4;
  return fits;
}

Dataset all_observed(std::size_t n, std::uint64_t seed) {
  auto d = DgpParams::scenario1();
  d.eta = {50.0, 0.0, 0.0, 0.0};
  return generate_dataset(d, n, seed);
}

}  // namespace

TEST_CASE("iota_full arithmetic") {
  CHECK(iota_full(3.0, 1, 0.3, 0.7, 0.4, 0.7) == 0.0);
  CHECK(iota_full(0.7, 0, 0.3, 0.7, 0.4, 0.1) == 0.0);
  CHECK(iota_full(1.0, 0, 0.5, 0.0, 0.5, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("closed-form conditional expectations") {
  auto fits = listed_fits();
  const ObservedRecord origin = ObservedRecord::missing(0.0, 0, 0.0);
  CHECK(cond_expectations(origin, fits).e_odds == doctest::Approx(std::exp(-0.48125)).epsilon(1e-12));
  CHECK(std::exp(-0.48125) == doctest::Approx(0.6180).epsilon(1e-4));

  const ObservedRecord rec = ObservedRecord::missing(0.8, 0, -1.1);
  auto no_l = fits;
  no_l.propensity.fit.coefficients[1] = 0.0;
  CHECK(cond_expectations(rec, no_l).e_odds == doctest::Approx(std::exp(-0.42 + 0.36 * -1.1)));

  auto flat_m = fits;
  flat_m.outcome.fit.coefficients[2] = 0.0;
  const auto t = cond_expectations(rec, flat_m);
  CHECK(t.zeta == doctest::Approx(t.e_odds * (0.27 + 0.23 * -1.1)));
  CHECK(t.v4_mean == doctest::Approx(0.27 + 0.23 * -1.1));
}

TEST_CASE("closed forms agree with Monte Carlo over L | Y, A=0, C") {
  const auto d = DgpParams::scenario1();
  const auto fits = oracle::exact_fits(d);
  const double points[3][2] = {{0.0, 0.0}, {1.2, -0.7}, {-0.5, 1.5}};
  for (int k = 0; k < 3; ++k) {
    const auto mc = oracle::mc_terms(d, points[k][0], points[k][1], 200000, 90 + k);
    const auto cf = cond_expectations(ObservedRecord::missing(points[k][0], 0, points[k][1]), fits);
    CHECK(std::abs(cf.e_odds - mc.e_odds.mean) <= 4 * mc.e_odds.se);
    CHECK(std::abs(cf.zeta - mc.zeta.mean) <= 4 * mc.zeta.se);
    CHECK(std::abs(cf.v4_mean - mc.v4.mean) <= 4 * mc.v4.se);
  }
}

TEST_CASE("odds overflow is reported with the predictor") {
  auto fits = listed_fits();
  fits.propensity.fit.coefficients[0] = 800.0;
  CHECK_THROWS_WITH_AS(cond_expectations(ObservedRecord::missing(0, 0, 0), fits),
                       doctest::Contains("propensity predictor"), Error);
}

TEST_CASE("iota_miss gating") {
  const auto fits = listed_fits();
  const Dataset d({ObservedRecord::missing(0.3, 0, 0.2), ObservedRecord::complete(0.3, 0, 0.2, 0.1)});
  InfluenceContext ctx;
  ctx.pi_hat = {0.5, 1.0};
  ctx.p_hat = {std::nan(""), 0.35};
  ctx.mu_y0 = {std::nan(""), 0.4};
  ctx.terms = {cond_expectations(d[0], fits), cond_expectations(d[1], fits)};
  ctx.pr_a1 = 0.4;
  CHECK(iota_miss(d[0], 0, ctx, 0.2) == conditional_iota_full(d[0], ctx.terms[0], 0.4, 0.2));
  CHECK(iota_miss(d[1], 1, ctx, 0.2) == iota_full(0.3, 0, 0.35, 0.4, 0.4, 0.2));
}

TEST_CASE("toy DGP: exact nuisances give a mean-zero influence function") {
  const auto toy = ToyDgp::from_file(oracle::toy_path());
  CHECK(std::abs(oracle::mean_iota_miss(toy, oracle::truth(toy), toy.psi())) <= 1e-12);
  CHECK(std::abs(oracle::mean_iota_miss(toy, oracle::truth(toy), toy.psi() + 0.1)) > 1e-3);
}

TEST_CASE("four-case robustness on the toy DGP") {
  const auto toy = ToyDgp::from_file(oracle::toy_path());
  const double psi = toy.psi();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto case_i = oracle::truth(toy);  // p, pi true
    oracle::perturb_f(toy, case_i, seed);
    CHECK(std::abs(oracle::mean_iota_miss(toy, case_i, psi)) <= 1e-10);

    auto case_ii = oracle::truth(toy);  // m, pi true; t and p wrong
    auto wrong_f = oracle::truth(toy);
    oracle::perturb_f(toy, wrong_f, seed);
    std::copy(&wrong_f.t1[0][0][0], &wrong_f.t1[0][0][0] + 8, &case_ii.t1[0][0][0]);
    oracle::perturb_p(toy, case_ii, 0.1 * static_cast<double>(seed));
    CHECK(std::abs(oracle::mean_iota_miss(toy, case_ii, psi)) <= 1e-10);

    auto case_iii = oracle::truth(toy);  // p, t true; m and pi wrong
    std::copy(&wrong_f.m[0][0][0], &wrong_f.m[0][0][0] + 8, &case_iii.m[0][0][0]);
    oracle::perturb_pi(case_iii, 0.8);
    CHECK(std::abs(oracle::mean_iota_miss(toy, case_iii, psi)) <= 1e-10);

    auto case_iv = oracle::truth(toy);  // m, t true; p and pi wrong
    oracle::perturb_p(toy, case_iv, -0.1 * static_cast<double>(seed));
    oracle::perturb_pi(case_iv, 0.7);
    CHECK(std::abs(oracle::mean_iota_miss(toy, case_iv, psi)) <= 1e-10);

    auto broken = oracle::truth(toy);  // only pi true: no guarantee
    oracle::perturb_f(toy, broken, seed);
    oracle::perturb_p(toy, broken, 0.15);
    CHECK(std::abs(oracle::mean_iota_miss(toy, broken, psi)) > 1e-4);
  }
}

TEST_CASE("collapse identity without missingness") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Dataset d = all_observed(800, seed);
    REQUIRE(d.all_observed());
    FitRecipe recipe;
    recipe.imputation_seed = seed;
    const auto fits = fit_nuisances(d, recipe);
    CHECK_FALSE(fits.missingness.has_value());
    const auto ctx = make_context(d, fits);
    for (std::size_t i = 0; i < d.n(); ++i) {
      CHECK(iota_miss(d[i], i, ctx, 0.3) ==
            iota_full(d[i].y, d[i].a, ctx.p_hat[i], ctx.mu_y0[i], ctx.pr_a1, 0.3));
    }
    CHECK(std::abs(estimate_dr(d, fits).psi_hat - estimate_aipw_full(d, fits).psi_hat) <= 1e-10);
    CHECK(std::abs(estimate_ipcw(d, fits).psi_hat - estimate_fulldata(d, recipe).psi_hat) <= 1e-10);
    CHECK(std::abs(estimate_cc(d, recipe).psi_hat - estimate_fulldata(d, recipe).psi_hat) <= 1e-12);
    const double m1 = estimate_mcdlm(d, fits, 1, 7).psi_hat;
    CHECK(std::abs(m1 - estimate_mcdlm(d, fits, 50, 8).psi_hat) <= 1e-10);
    CHECK(std::abs(m1 - estimate_fulldata(d, recipe).psi_hat) <= 1e-8);
  }
}

TEST_CASE("DR psi_hat solves the empirical influence equation") {
  const Dataset d = generate_dataset(DgpParams::scenario1(), 2000, 5);
  FitRecipe recipe;
  recipe.imputation_seed = 5;
  const auto fits = fit_nuisances(d, recipe);
  const auto ctx = make_context(d, fits);
  const double psi = estimate_dr(d, ctx).psi_hat;
  CompensatedSum s;
  for (std::size_t i = 0; i < d.n(); ++i) s.add(iota_miss(d[i], i, ctx, psi));
  CHECK(std::abs(s.value() / d.n()) <= 1e-12);
}

TEST_CASE("IPCW is invariant to a global scale of pi_hat") {
  const Dataset d = generate_dataset(DgpParams::scenario1(), 1500, 6);
  FitRecipe recipe;
  const auto fits = fit_nuisances(d, recipe);
  auto ctx = make_context(d, fits);
  const double before = estimate_ipcw(d, ctx).psi_hat;
  for (double& p : ctx.pi_hat) p *= 0.5;
  CHECK(estimate_ipcw(d, ctx).psi_hat == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("att_hat is theta_hat minus psi_hat for every estimator") {
  const auto sim = simulate(DgpParams::scenario1(), 1500, 9);
  FitRecipe recipe;
  recipe.m_imputations = 10;
  for (const auto kind : kAllEstimators) {
    const bool oracle_data = kind == EstimatorKind::full || kind == EstimatorKind::aipw;
    const auto rep = run_estimator(kind, oracle_data ? sim.full : sim.observed, recipe);
    CHECK(rep.att_hat == rep.theta_hat - rep.psi_hat);
    CHECK(rep.estimator == kind);
  }
}

TEST_CASE("oracle estimators refuse data with missing l") {
  const Dataset d = generate_dataset(DgpParams::scenario1(), 500, 1);
  try {
    estimate_fulldata(d, FitRecipe{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::oracle_data_required);
  }
}

TEST_CASE("positivity floor on pi_hat") {
  const Dataset d({ObservedRecord::complete(0, 0, 0, 0), ObservedRecord::complete(1, 1, 0, 0)});
  InfluenceContext ctx;
  ctx.pi_hat = {1e-9, 1.0};
  ctx.p_hat = {0.5, 0.5};
  ctx.mu_y0 = {0.0, 0.0};
  ctx.terms.resize(2);
  ctx.pr_a1 = 0.5;
  try {
    check_context(d, ctx);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::positivity);
    CHECK(exit_code(e.kind()) == 4);
  }
}

TEST_CASE("large-sample consistency on scenario 1") {
  const auto params = DgpParams::scenario1();
  const auto sim = simulate(params, 100000, 31);
  FitRecipe recipe;
  recipe.m_imputations = 5;
  recipe.imputation_seed = 31;
  const double psi = true_psi(params);
  CHECK(std::abs(estimate_fulldata(sim.full, recipe).psi_hat - psi) < 0.01);
  const auto fits = fit_nuisances(sim.observed, recipe);
  CHECK(std::abs(estimate_dr(sim.observed, fits).psi_hat - psi) < 0.01);
  CHECK(std::abs(estimate_ipcw(sim.observed, fits).psi_hat - psi) < 0.01);
}

TEST_CASE("naive is consistent when L carries no confounding") {
  auto params = DgpParams::scenario1();
  params.alpha[1] = 0.0;  // lambda1 = 0
  params.alpha[4] = 0.0;  // nu2 = 0
  const Dataset d = generate_dataset(params, 100000, 32);
  CHECK(std::abs(estimate_naive(d, FitRecipe{}).psi_hat - true_psi(params)) < 0.01);
}

TEST_CASE("MCDLM imputation error shrinks with M") {
  const Dataset d = generate_dataset(DgpParams::scenario1(), 2500, 40);
  FitRecipe recipe;
  const auto fits = fit_nuisances(d, recipe);
  const double limit = estimate_mcdlm(d, fits, 2000, 1).psi_hat;
  std::vector<double> single;
  for (std::uint64_t s = 0; s < 20; ++s) single.push_back(estimate_mcdlm(d, fits, 1, 100 + s).psi_hat);
  const double sd1 = std::sqrt(sample_variance(single));
  CHECK(sd1 > 0.0);
  CHECK(std::abs(single[0] - limit) <= 3 * sd1);
  const double m100 = estimate_mcdlm(d, fits, 100, 2).psi_hat;
  CHECK(m100 != single[0]);
  CHECK(std::abs(m100 - limit) <= 3 * sd1 / std::sqrt(100.0) + 1e-12);
}

TEST_CASE("estimator names") {
  CHECK(parse_estimator("dr") == EstimatorKind::dr);
  CHECK(parse_estimator("MCDLM") == EstimatorKind::mcdlm);
  CHECK(parse_estimator_list("DR, ipcw,cc").size() == 3);
  CHECK_THROWS_AS(parse_estimator("tmle"), Error);
}
