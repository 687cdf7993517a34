#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "attmiss/data.hpp"
#include "attmiss/estimators.hpp"
#include "attmiss/nuisance.hpp"

namespace attmiss {

// Gaussian data-generating process:
//   C = N(0,1) + U(-1,1)
//   logit pr(A=1 | C) = zeta0 + zeta1 C
//   Y = upsilon0 + upsilon1 A + upsilon2 C + eps_Y,   var eps_Y = sigma_y_sq
//   L = alpha0 + alpha1 A + alpha2 C + eps_L,         var eps_L = sigma_l_sq
//   cov(eps_Y, eps_L) = sigma_yl
//   logit pr(R=1 | A, C, Y) = eta0 + eta1 A + eta2 C + eta3 Y
struct DgpParams {
  std::array<double, 2> zeta{};
  std::array<double, 4> upsilon{};  // upsilon0..2, sigma_y_sq
  std::array<double, 5> alpha{};    // alpha0..2, sigma_l_sq, sigma_yl
  std::array<double, 4> eta{};

  double sigma_y_sq() const { return upsilon[3]; }
  double sigma_l_sq() const { return alpha[3]; }
  double sigma_yl() const { return alpha[4]; }
  // L is generated after A, so the adjustment functional E[m(0, L, C) | A=1]
  // identifies an ATT of nu1 = upsilon1 - nu2 alpha1, not upsilon1.
  double att() const { return upsilon[1] - sigma_yl() / sigma_l_sq() * alpha[1]; }
  double structural_effect() const { return upsilon[1]; }

  // Coefficients implied by bivariate-normal conditioning:
  //   L | A, Y, C  mean phi0 + phi1 A + phi2 Y + phi3 C
  //   Y | A, L, C  mean nu0 + nu1 A + nu2 L + nu3 C
  //   logit pr(A=1 | L, C) = lambda0 + lambda1 L + lambda2 C
  Eigen::Vector4d phi() const;
  Eigen::Vector4d nu() const;
  Eigen::Vector3d lambda() const;
  double t_variance() const;  // var(L | A, Y, C)
  double m_variance() const;  // var(Y | A, L, C)

  std::vector<std::string> validate() const;

  static DgpParams scenario1();
  static DgpParams scenario2();
};

struct SimulatedData {
  Dataset observed;
  Dataset full;  // same records with l always present
};

SimulatedData simulate(const DgpParams& params, std::size_t n, std::uint64_t seed);
Dataset generate_dataset(const DgpParams& params, std::size_t n, std::uint64_t seed);

// E[m(0, L, C) | A=1] = upsilon0 + nu2 alpha1 + upsilon2 E[C | A=1], with
// E[C | A=1] by Simpson's rule over the uniform part and Gauss-Hermite over
// the normal part.
double true_psi(const DgpParams& params);

// Binary C, A, L, Y with atom probabilities p(c, a, l, y) and observation
// probabilities pi(a, y, c) in (0, 1].
struct ToyDgp {
  std::array<double, 16> atoms{};  // index 8c + 4a + 2l + y
  std::array<double, 8> pi{};      // index 4a + 2y + c

  double p(int c, int a, int l, int y) const { return atoms[static_cast<std::size_t>(8 * c + 4 * a + 2 * l + y)]; }
  double pi_of(int a, int y, int c) const { return pi[static_cast<std::size_t>(4 * a + 2 * y + c)]; }
  double pr_a1() const;
  // E[Y | A=a, L=l, C=c]
  double m(int a, int l, int c) const;
  // pr(A=1 | L=l, C=c)
  double propensity(int l, int c) const;
  // pr(L=1 | A=a, Y=y, C=c)
  double t1(int a, int y, int c) const;
  // E[Y0 | A=1] by enumeration
  double psi() const;

  // Parses {"atoms": [[c, a, l, y, prob], ...], "pi": [[a, y, c, prob], ...]}.
  static ToyDgp from_json(const std::string& text);
  static ToyDgp from_file(const std::string& path);
  std::vector<std::string> validate() const;
};

Dataset generate_toy_dataset(const ToyDgp& toy, std::size_t n, std::uint64_t seed);

struct Misspec {
  bool f_star = false;   // drop C from the confounder and outcome models
  bool p_star = false;   // propensity on (1, L)
  bool pi_star = false;  // missingness on (1, C)

  friend bool operator==(const Misspec&, const Misspec&) = default;
};

// Comma-separated subset of {f_star, p_star, pi_star} (also f*, p*, pi*);
// Error(config) for anything else.
Misspec parse_misspec(const std::string& text);
std::string to_string(const Misspec& m);

// The misspecified designs keep every L coefficient so the odds ratio
// between A and L given C keeps its form.
FitRecipe misspecify(FitRecipe recipe, const Misspec& m);

enum class DgpKind { scenario1, scenario2, toy };

DgpKind parse_dgp(const std::string& text);
const char* to_string(DgpKind kind);

struct ScenarioConfig {
  std::string name = "a";
  DgpKind dgp = DgpKind::scenario1;
  std::optional<DgpParams> params;  // overrides the built-in parameters of dgp
  std::optional<ToyDgp> toy;        // required when dgp == toy
  std::size_t n = 2500;
  Misspec misspec;
  std::size_t replicates = 200;
  std::uint64_t master_seed = 20240601;
  std::vector<EstimatorKind> estimators{EstimatorKind::dr, EstimatorKind::naive,
                                        EstimatorKind::cc, EstimatorKind::ipcw,
                                        EstimatorKind::mcdlm, EstimatorKind::full};
  int m_imputations = 100;
  bool sandwich = true;                    // sandwich SE for DR
  std::optional<std::size_t> bootstrap_b;  // bootstrap SE for DR
  int threads = 1;

  std::vector<std::string> validate() const;
  DgpParams dgp_params() const;
  double truth() const;  // target ATT
};

// Misspecification grid: (a) none, (b) f*, (c) p*, (d) pi*, (e) pi* p*, (f) f* p*,
// (g) f* pi*, (h) f* p* pi*; (g) and (h) use scenario 2's parameters.
ScenarioConfig grid_scenario(char letter);
inline constexpr char kScenarioLetters[] = {'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h'};

// Seed of replicate r; the dataset and the imputation draws of that
// replicate derive from it, so `estimate --seed` on an exported replicate
// reproduces the simulation.
std::uint64_t replicate_seed(std::uint64_t master, std::size_t replicate);

struct ResultRow {
  std::string scenario;
  std::size_t replicate = 0;
  EstimatorKind estimator = EstimatorKind::dr;
  double psi_hat = 0.0;
  double theta_hat = 0.0;
  double att_hat = 0.0;
  std::optional<double> se;  // of psi_hat
  bool converged = false;
  std::string error;
};

struct BootstrapRow {
  std::string scenario;
  std::size_t replicate = 0;
  EstimatorKind estimator = EstimatorKind::dr;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t dropped = 0;
};

struct MonteCarloResults {
  std::vector<ResultRow> rows;
  std::vector<BootstrapRow> bootstrap;
  std::vector<std::string> warnings;
};

// Rows ordered by (replicate, estimator order of config.estimators);
// per-estimator failures become rows with converged = false.
MonteCarloResults run_monte_carlo(const ScenarioConfig& config);

// Data (observed and full) of one replicate, as used by run_monte_carlo.
SimulatedData replicate_data(const ScenarioConfig& config, std::size_t replicate);

struct SummaryRow {
  std::string scenario;
  EstimatorKind estimator = EstimatorKind::dr;
  std::size_t n_ok = 0;
  std::size_t failures = 0;
  bool available = false;  // at least two successful replicates
  double mean_bias = 0.0;  // of att_hat against truth
  double mc_sd = 0.0;
  double mc_se = 0.0;  // mc_sd / sqrt(n_ok)
  double median = 0.0, q1 = 0.0, q3 = 0.0, iqr = 0.0, min = 0.0, max = 0.0;
  double mean_psi = 0.0, sd_psi = 0.0;
  std::optional<double> median_se;  // median reported SE of psi_hat

  bool unbiased(double bands = 2.0) const { return std::abs(mean_bias) <= bands * mc_se; }
};

// One row per (scenario, estimator) in order of first appearance.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, double truth);

}  // namespace attmiss
