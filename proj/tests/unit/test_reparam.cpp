#include <doctest.h>

#include <cmath>

#include "attmiss/error.hpp"
#include "attmiss/reparam.hpp"
#include "attmiss/simengine.hpp"

using namespace attmiss;
using P = ReparamParams;

namespace {

ReparamParams scenario_params() {
  const auto d = DgpParams::scenario1();
  const auto nu = d.nu();
  ReparamParams p;
  p[P::alpha0] = d.alpha[0];
  p[P::alpha_c] = d.alpha[2];
  p[P::log_sigma_j_sq] = std::log(d.sigma_l_sq());
  p[P::beta] = d.alpha[1] / d.sigma_l_sq();
  p[P::theta_r0] = nu[0];
  p[P::theta_ra] = nu[1];
  p[P::theta_rc] = nu[3];
  p[P::log_sigma_r_sq] = std::log(d.m_variance());
  p[P::omega] = nu[2] / d.m_variance();
  return p;
}

const Eigen::Vector4d kEta(1.0, -1.75, -1.75, 1.25);

}  // namespace

TEST_CASE("complete records give the Gaussian complete-data log likelihood") {
  const auto p = scenario_params();
  const Dataset d({ObservedRecord::complete(0.4, 1, 0.2, -0.3)});
  const double expected = normal_log_pdf(-0.3, p.mean_l(1, 0.2), p.sigma_j_sq()) +
                          normal_log_pdf(0.4, p.mean_y(1, 0.2, -0.3), p.sigma_r_sq());
  CHECK(observed_loglik(p, d) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("missing record: Gauss-Hermite equals the closed-form marginal of Y") {
  const auto p = scenario_params();
  const ObservedRecord rec = ObservedRecord::missing(0.7, 0, -0.4);
  const double slope = p[P::omega] * p.sigma_r_sq();
  const double mean = p.mean_y(0, -0.4, p.mean_l(0, -0.4));
  const double var = p.sigma_r_sq() + slope * slope * p.sigma_j_sq();
  CHECK(observed_loglik(p, Dataset({rec}), 20) ==
        doctest::Approx(normal_log_pdf(0.7, mean, var)).epsilon(1e-12));
}

TEST_CASE("binary l grid matches the two-term enumeration") {
  const auto p = scenario_params();
  const ObservedRecord rec = ObservedRecord::missing(0.1, 1, 0.5);
  const double expected = std::log(
      std::exp(normal_log_pdf(0, p.mean_l(1, 0.5), p.sigma_j_sq()) + normal_log_pdf(0.1, p.mean_y(1, 0.5, 0), p.sigma_r_sq())) +
      std::exp(normal_log_pdf(1, p.mean_l(1, 0.5), p.sigma_j_sq()) + normal_log_pdf(0.1, p.mean_y(1, 0.5, 1), p.sigma_r_sq())));
  CHECK(observed_loglik(p, Dataset({rec}), discrete_support({0, 1})) ==
        doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("observed log likelihood is quadrature stable") {
  const auto p = scenario_params();
  const Dataset d = simulate_reparam_family(p, kEta, 3000, 8);
  CHECK(std::abs(observed_loglik(p, d, 20) - observed_loglik(p, d, 40)) <= 1e-8);
}

TEST_CASE("analytic gradient matches central differences") {
  auto p = scenario_params();
  const Dataset d = simulate_reparam_family(p, kEta, 400, 2);
  p[P::omega] += 0.1;
  p[P::beta] -= 0.2;
  Eigen::VectorXd grad;
  observed_loglik(p, d, 20, &grad);
  for (int k = 0; k < P::kSize; ++k) {
    ReparamParams up = p, down = p;
    up.values[k] += 1e-6;
    down.values[k] -= 1e-6;
    const double fd = (observed_loglik(up, d) - observed_loglik(down, d)) / 2e-6;
    CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("non-finite likelihood names the record") {
  auto p = scenario_params();
  p[P::log_sigma_j_sq] = 1e6;
  const Dataset d({ObservedRecord::complete(0, 0, 0, 0), ObservedRecord::missing(0, 1, 0)});
  CHECK_THROWS_WITH_AS(observed_loglik(p, d), doctest::Contains("record"), Error);
}

TEST_CASE("without missingness the MLE is the closed-form decomposition") {
  const auto p = scenario_params();
  const Dataset d = simulate_reparam_family(p, Eigen::Vector4d(50, 0, 0, 0), 20000, 3);
  REQUIRE(d.all_observed());
  const auto closed = complete_data_mle(d);
  const auto fit = fit_reparam_mle(d, p);
  for (int k = 0; k < P::kSize; ++k) {
    CHECK(fit.params.values[k] == doctest::Approx(closed.values[k]).epsilon(1e-5).scale(1.0));
  }
  CHECK(fit.gradient_norm <= 1e-6);
}

TEST_CASE("profiling omega never beats the full maximum") {
  const auto p = scenario_params();
  const Dataset d = simulate_reparam_family(p, kEta, 4000, 4);
  const auto full = fit_reparam_mle(d, p);
  std::array<bool, P::kSize> fixed{};
  fixed[P::omega] = true;
  const auto profile = fit_reparam_mle(d, p, 20, fixed);
  CHECK(profile.loglik <= full.loglik + 1e-12);
  CHECK(profile.params[P::omega] == p[P::omega]);
  CHECK(profile.se[P::omega] == 0.0);
}

TEST_CASE("h(kappa) is the propensity at L = 0") {
  const auto d = simulate(DgpParams::scenario1(), 20000, 12).observed;
  const auto pi = fit_logistic(d, main_effects(Column::r, {Column::a, Column::c, Column::y}));
  const auto model = fit_h_kappa(d, pi);
  const auto lambda = DgpParams::scenario1().lambda();
  CHECK(h_kappa(model, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-lambda[0]))).epsilon(0.1));
}
