// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "attmiss/estimators.hpp"
#include "attmiss/inference.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/oddsratio.hpp"
#include "attmiss/reparam.hpp"
#include "attmiss/simengine.hpp"
#include "support/oracles.hpp"

using namespace attmiss;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int id, bool pass, const std::string& detail, const Timer& t) {
  if (!pass) ++failures;
  std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, pass ? "PASS" : "FAIL", detail.c_str(),
              t.seconds());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void missingness_rate() {
  Timer t;
  const Dataset d = generate_dataset(DgpParams::scenario1(), 100000, 1);
  double r = 0.0;
  for (const auto& rec : d.records()) r += rec.r;
  r /= static_cast<double>(d.n());
  report(1, r >= 0.59 && r <= 0.63, fmt("mean(R) = %.4f, want [0.59, 0.63]", r), t);
}

void derived_identities() {
  Timer t;
  const auto d = DgpParams::scenario1();
  const double phi2 = d.phi()[2], nu2 = d.nu()[2], lambda1 = d.lambda()[1];
  const bool ok = std::abs(phi2 - 0.41) <= 0.01 && std::abs(nu2 - 0.49) <= 0.01 &&
                  std::abs(lambda1 - 0.5) <= 0.01;
  report(2, ok, fmt("phi2 = %.4f, nu2 = %.4f, lambda1 = %.4f", phi2, nu2, lambda1), t);
}

void four_cases() {
  Timer t;
  const auto toy = ToyDgp::from_file(oracle::toy_path());
  const double psi = toy.psi();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto wrong_f = oracle::truth(toy);
    oracle::perturb_f(toy, wrong_f, seed);
    const double shift = 0.05 * static_cast<double>(seed);

    auto i = oracle::truth(toy);
    std::copy(&wrong_f.t1[0][0][0], &wrong_f.t1[0][0][0] + 8, &i.t1[0][0][0]);
    std::copy(&wrong_f.m[0][0][0], &wrong_f.m[0][0][0] + 8, &i.m[0][0][0]);

    auto ii = oracle::truth(toy);
    std::copy(&wrong_f.t1[0][0][0], &wrong_f.t1[0][0][0] + 8, &ii.t1[0][0][0]);
    oracle::perturb_p(toy, ii, shift);

    auto iii = oracle::truth(toy);
    std::copy(&wrong_f.m[0][0][0], &wrong_f.m[0][0][0] + 8, &iii.m[0][0][0]);
    oracle::perturb_pi(iii, 0.6 + 0.03 * static_cast<double>(seed));

    auto iv = oracle::truth(toy);
    oracle::perturb_p(toy, iv, -shift);
    oracle::perturb_pi(iv, 0.6 + 0.03 * static_cast<double>(seed));

    for (const auto* w : {&i, &ii, &iii, &iv}) {
      worst = std::max(worst, std::abs(oracle::mean_iota_miss(toy, *w, psi)));
    }
  }
  report(3, worst <= 1e-10, fmt("max |E iota_miss(psi)| over cases (i)-(iv) = %.2e", worst), t);
}

void theorem_one() {
  Timer t;
  double round_trip = 0.0, lemma = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto j = random_discrete_joint(2 + seed % 4, 2 + (seed / 4) % 4, seed);
    const auto f = extract_factorization(j);
    for (int a = 0; a < 2; ++a) {
      const Eigen::MatrixXd back = reconstruct_joint(f, a, 0.0);
      round_trip = std::max(round_trip, (back - j.conditional(a)).cwiseAbs().maxCoeff());
    }
    // Same joint as a three-way table over (A, L, Y).
    Table3 tab{2, j.l_points.size(), j.y_points.size(), {}};
    tab.p.resize(tab.n1 * tab.n2 * tab.n3);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t l = 0; l < tab.n2; ++l)
        for (std::size_t y = 0; y < tab.n3; ++y)
          tab.at(a, l, y) = j.mass[a](static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(y));
    lemma = std::max(lemma, lemma1_residual(lemma1_inputs(tab)));
  }
  report(4, round_trip <= 1e-12 && lemma <= 1e-10,
         fmt("round trip max error = %.2e, lemma1_residual = %.2e (50 joints)", round_trip, lemma),
         t);
}

void mgf_closed_forms() {
  Timer t;
  const auto d = DgpParams::scenario1();
  const auto fits = oracle::exact_fits(d);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  double worst = 0.0;
  int outside = 0;
  for (int k = 0; k < 20; ++k) {
    const double c = z(rng), y = d.upsilon[0] + d.upsilon[2] * c + z(rng);
    const auto cf = cond_expectations(ObservedRecord::missing(y, 0, c), fits);
    const auto mc = oracle::mc_terms(d, y, c, 1000000, 500 + static_cast<std::uint64_t>(k));
    const std::pair<double, oracle::McMoment> pairs[3] = {
        {cf.e_odds, mc.e_odds}, {cf.zeta, mc.zeta}, {cf.v4_mean, mc.v4}};
    for (const auto& [closed, m] : pairs) {
      const double zscore = std::abs(closed - m.mean) / m.se;
      worst = std::max(worst, zscore);
      if (zscore > 3.0) ++outside;
    }
  }
  report(5, outside == 0,
         fmt("60 comparisons at 20 (Y, C) points, %d beyond 3 SE, max |z| = %.2f", outside, worst),
         t);
}

bool biased(const SummaryRow& r) { return !r.unbiased(2.0); }

void bias_pattern() {
  Timer t;
  const double truth = DgpParams::scenario1().att();
  std::map<char, std::map<EstimatorKind, SummaryRow>> grid;
  for (char letter : kScenarioLetters) {
    auto cfg = grid_scenario(letter);
    cfg.replicates = 200;
    cfg.n = 2500;
    cfg.sandwich = false;
    cfg.estimators = {EstimatorKind::dr, EstimatorKind::naive, EstimatorKind::cc,
                      EstimatorKind::ipcw, EstimatorKind::mcdlm};
    cfg.threads = worker_count();
    const auto res = run_monte_carlo(cfg);
    for (const auto& row : summarize(res.rows, cfg.truth())) grid[letter][row.estimator] = row;
  }

  std::vector<std::string> broken;
  const auto expect = [&](bool ok, char letter, const char* what) {
    if (!ok) broken.push_back(std::string(1, letter) + ": " + what);
  };
  for (char s : kScenarioLetters) {
    const auto& g = grid[s];
    const auto m = grid_scenario(s).misspec;
    const auto& dr = g.at(EstimatorKind::dr);
    if (s <= 'e') {
      expect(dr.unbiased(2.0), s, "DR biased");
    } else {
      expect(biased(dr), s, "DR unbiased");
      expect(std::abs(dr.mean_bias) < std::abs(g.at(EstimatorKind::cc).mean_bias), s, "|DR| >= |CC|");
      expect(std::abs(dr.mean_bias) < std::abs(g.at(EstimatorKind::naive).mean_bias), s,
             "|DR| >= |Naive|");
    }
    if (s <= 'g') {
      expect(biased(g.at(EstimatorKind::cc)), s, "CC unbiased");
      expect(biased(g.at(EstimatorKind::naive)), s, "Naive unbiased");
    }
    if (m.pi_star || m.p_star) expect(biased(g.at(EstimatorKind::ipcw)), s, "IPCW unbiased");
    if (m.p_star) expect(biased(g.at(EstimatorKind::mcdlm)), s, "MCDLM unbiased");
  }

  std::printf("  scenario  estimator  mean_bias   mc_se    bias/se\n");
  for (char s : kScenarioLetters)
    for (const auto& [kind, r] : grid[s])
      std::printf("  (%c)       %-9s %+9.4f  %7.4f  %+7.2f\n", s, to_string(kind), r.mean_bias,
                  r.mc_se, r.mean_bias / r.mc_se);
  std::string detail = fmt("truth ATT %.4f, 200 x n = 2500, scenarios (a)-(h)", truth);
  for (const auto& b : broken) detail += "; " + b;
  report(6, broken.empty(), detail, t);

  // Against the structural effect instead of the identified ATT.
  const double gap = DgpParams::scenario1().structural_effect() - truth;
  std::printf("  info: against 0.38 the DR mean bias in (a) would be %+.4f (%.1f MC SE)\n",
              grid['a'].at(EstimatorKind::dr).mean_bias - gap,
              (grid['a'].at(EstimatorKind::dr).mean_bias - gap) / grid['a'].at(EstimatorKind::dr).mc_se);
}

void variance_agreement() {
  Timer t;
  auto cfg = grid_scenario('a');
  cfg.replicates = 200;
  cfg.n = 2500;
  cfg.estimators = {EstimatorKind::dr};
  cfg.sandwich = true;
  cfg.bootstrap_b = 200;
  cfg.threads = worker_count();
  const auto res = run_monte_carlo(cfg);
  const auto summary = summarize(res.rows, cfg.truth());
  const double sd = summary.at(0).sd_psi;
  const double sandwich = summary.at(0).median_se.value_or(std::nan(""));
  std::vector<double> boot;
  for (const auto& b : res.bootstrap) boot.push_back(b.se);
  std::sort(boot.begin(), boot.end());
  const double bootstrap = boot.empty() ? std::nan("") : quantile_sorted(boot, 0.5);
  const double rs = sandwich / sd - 1.0, rb = bootstrap / sd - 1.0;
  const bool ok = std::abs(rs) <= 0.15 && std::abs(rb) <= 0.15;
  report(7, ok,
         fmt("MC sd(psi_hat) = %.4f, median sandwich SE = %.4f (%+.1f%%), median bootstrap SE "
             "= %.4f (%+.1f%%), %zu bootstrap runs",
             sd, sandwich, 100 * rs, bootstrap, 100 * rb, boot.size()),
         t);
  double ss = 0.0;
  std::size_t k = 0;
  for (const auto& row : res.rows)
    if (row.se) {
      ss += *row.se * *row.se;
      ++k;
    }
  std::printf("  info: root-mean-square sandwich SE = %.4f (%+.1f%%); reported SEs are right-skewed "
              "because 1 / pi_hat has a long tail at n = 2500\n",
              std::sqrt(ss / static_cast<double>(k)), 100 * (std::sqrt(ss / static_cast<double>(k)) / sd - 1.0));
}

void collapse_identity() {
  Timer t;
  auto d = DgpParams::scenario1();
  d.eta = {50.0, 0.0, 0.0, 0.0};
  double worst = 0.0;
  bool pi_one = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset data = generate_dataset(d, 1000 + 100 * seed, seed);
    FitRecipe recipe;
    recipe.imputation_seed = seed;
    const auto fits = fit_nuisances(data, recipe);
    const auto ctx = make_context(data, fits);
    for (double p : ctx.pi_hat) pi_one = pi_one && p == 1.0;
    worst = std::max(worst, std::abs(estimate_dr(data, ctx).psi_hat -
                                     estimate_aipw_full(data, fits).psi_hat));
  }
  report(8, pi_one && worst <= 1e-10,
         fmt("max |DR - AIPW| over 20 datasets = %.2e, pi_hat == 1: %s", worst,
             pi_one ? "yes" : "no"),
         t);
}

void incompatibility() {
  Timer t;
  LogisticIncompatibility ex;
  const auto d = DgpParams::scenario1();
  ex.phi = d.phi();
  ex.gamma << -0.4, 0.3, 0.5;
  ex.lambda1 = 0.5;
  for (double c = -3; c <= 3; c += 0.25) ex.c_grid.push_back(c);
  const double with_phi2 = incompatibility_gap(ex).linear;
  ex.phi[2] = 0.0;
  const double without = incompatibility_gap(ex).linear;
  std::vector<double> grid;
  for (double v = -2; v <= 2; v += 0.25) grid.push_back(v);
  const double s_l = d.t_variance(), s_y = d.m_variance();
  const double normal_both = normal_incompatibility_gap(0.41, 0.49, s_l, s_y, grid, grid);
  const double normal_zero = normal_incompatibility_gap(0.0, 0.0, s_l, s_y, grid, grid);
  const double normal_nu_only = normal_incompatibility_gap(0.41, 0.0, s_l, s_y, grid, grid);
  const bool ok = with_phi2 > 0.0 && without <= 1e-10 && normal_both > 0.0 && normal_zero <= 1e-10;
  report(9, ok,
         fmt("logistic gap %.3e at phi2 = %.2f, %.1e at phi2 = 0; normal gap %.3f at "
             "(0.41, 0.49), %.1e at (0, 0)",
             with_phi2, d.phi()[2], without, normal_both, normal_zero),
         t);
  std::printf("  info: normal gap with nu2 = 0 but phi2 = 0.41 is %.3f, so nu2 = 0 alone does "
              "not restore compatibility\n",
              normal_nu_only);
}

void reparam_mle() {
  Timer t;
  const auto d = DgpParams::scenario1();
  const auto nu = d.nu();
  ReparamParams truth;
  truth[ReparamParams::alpha0] = d.alpha[0];
  truth[ReparamParams::alpha_c] = d.alpha[2];
  truth[ReparamParams::log_sigma_j_sq] = std::log(d.sigma_l_sq());
  truth[ReparamParams::beta] = d.alpha[1] / d.sigma_l_sq();
  truth[ReparamParams::theta_r0] = nu[0];
  truth[ReparamParams::theta_ra] = nu[1];
  truth[ReparamParams::theta_rc] = nu[3];
  truth[ReparamParams::log_sigma_r_sq] = std::log(d.m_variance());
  truth[ReparamParams::omega] = nu[2] / d.m_variance();
  const Dataset data =
      simulate_reparam_family(truth, Eigen::Vector4d(1.0, -1.75, -1.75, 1.25), 50000, 10);
  const auto start = complete_data_mle(data);
  const auto fit = fit_reparam_mle(data, start, 20);
  double worst = 0.0;
  std::string worst_name;
  for (int k = 0; k < ReparamParams::kSize; ++k) {
    const double z = std::abs(fit.params.values[k] - truth.values[k]) / fit.se[k];
    if (z > worst) {
      worst = z;
      worst_name = ReparamParams::names()[static_cast<std::size_t>(k)];
    }
  }
  const double stability =
      std::abs(observed_loglik(fit.params, data, 20) - observed_loglik(fit.params, data, 40));
  report(10, worst <= 3.0 && stability <= 1e-8,
         fmt("n = 50000, max |est - truth| / SE = %.2f (%s), order 20 vs 40 = %.1e", worst,
             worst_name.c_str(), stability),
         t);
}

}  // namespace

int main() {
  const auto guard = [](int id, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("criterion %2d: FAIL  threw: %s\n", id, e.what());
      std::fflush(stdout);
    }
  };
  guard(1, missingness_rate);
  guard(2, derived_identities);
  guard(3, four_cases);
  guard(4, theorem_one);
  guard(5, mgf_closed_forms);
  guard(8, collapse_identity);
  guard(9, incompatibility);
  guard(10, reparam_mle);
  guard(6, bias_pattern);
  guard(7, variance_agreement);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
