#include <doctest.h>

#include <random>

#include "attmiss/error.hpp"
#include "attmiss/glm.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/random.hpp"

using namespace attmiss;

namespace {

Dataset logistic_sample(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  std::vector<ObservedRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = z(rng), c = z(rng);
    const int a = u(rng) < expit(-0.3 + 0.8 * l - 0.5 * c) ? 1 : 0;
    recs.push_back(ObservedRecord::complete(0.0, a, c, l));
  }
  return Dataset(recs);
}

}  // namespace

TEST_CASE("logistic MLE recovers its generating coefficients") {
  const auto fit = fit_logistic(logistic_sample(40000, 11), main_effects(Column::a, {Column::l, Column::c}));
  CHECK(fit.fit.converged);
  CHECK(fit.coefficients()[0] == doctest::Approx(-0.3).epsilon(0.05));
  CHECK(fit.coefficients()[1] == doctest::Approx(0.8).epsilon(0.05));
  CHECK(fit.coefficients()[2] == doctest::Approx(-0.5).epsilon(0.05));
  CHECK(fit.fit.gradient_norm <= 1e-8);
}

TEST_CASE("logistic score is zero at the fit, including with weights") {
  const Dataset d = logistic_sample(500, 3);
  const auto design = main_effects(Column::a, {Column::l, Column::c});
  Eigen::VectorXd w(500);
  for (int i = 0; i < 500; ++i) w[i] = 0.5 + (i % 7) * 0.25;
  const auto fit = fit_logistic(d, design, w);
  const Eigen::MatrixXd x = design_matrix(d, design);
  const Eigen::VectorXd y = response_vector(d, design);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 500; ++i) score += w[i] * (y[i] - expit(x.row(i).dot(fit.coefficients()))) * x.row(i).transpose();
  CHECK(score.lpNorm<Eigen::Infinity>() / w.sum() <= 1e-8);
}

TEST_CASE("hand computed logistic fit with one binary covariate") {
  // Saturated two-group model: coefficients are the group log odds.
  std::vector<ObservedRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(ObservedRecord::complete(0, 1, 0, 0));
  recs.push_back(ObservedRecord::complete(0, 0, 0, 0));
  recs.push_back(ObservedRecord::complete(0, 1, 0, 1));
  for (int i = 0; i < 3; ++i) recs.push_back(ObservedRecord::complete(0, 0, 0, 1));
  const auto fit = fit_logistic(Dataset(recs), main_effects(Column::a, {Column::l}));
  CHECK(fit.coefficients()[0] == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(fit.coefficients()[1] == doctest::Approx(-2.0 * std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("degenerate and singular designs are reported") {
  std::vector<ObservedRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back(ObservedRecord::complete(i, 1, i * 0.1, i));
  CHECK_THROWS_AS(fit_logistic(Dataset(recs), main_effects(Column::a, {Column::c})), Error);

  Eigen::MatrixXd x(6, 3);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    x.row(i) << 1.0, i, i;
    y[i] = i % 2;
  }
  try {
    fit_logistic(x, y);
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_design);
  }
  CHECK_THROWS_AS(fit_linear(x, y), Error);
}

TEST_CASE("complete separation does not loop forever") {
  std::vector<ObservedRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(ObservedRecord::complete(0, i < 10 ? 0 : 1, 0, i));
  CHECK_THROWS_AS(fit_logistic(Dataset(recs), main_effects(Column::a, {Column::l})), Error);
}

TEST_CASE("weighted least squares matches the normal equations") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd y(5), w(5);
  y << 1.0, 2.9, 5.2, 7.1, 8.8;
  w << 1, 2, 1, 2, 1;
  const auto fit = fit_linear(x, y, w);
  const Eigen::VectorXd beta =
      (x.transpose() * w.asDiagonal() * x).ldlt().solve(x.transpose() * w.asDiagonal() * y);
  CHECK((fit.coefficients - beta).norm() < 1e-12);
  const Eigen::VectorXd e = y - x * beta;
  CHECK(*fit.residual_variance == doctest::Approx(e.dot(w.asDiagonal() * e) / (w.sum() - 2)));
}

TEST_CASE("l_slope is the coefficient on l, including in products") {
  DesignSpec spec{Column::a, {{Column::l}, {Column::c}, {Column::l, Column::c}}, true};
  FittedModel m{spec, Link::logit, {}};
  m.fit.coefficients = Eigen::Vector4d(0.1, 0.5, -0.2, 0.3);
  RowValues v;
  v.c = 2.0;
  CHECK(m.l_slope(v) == doctest::Approx(0.5 + 0.3 * 2.0));
  v.l = 1.5;
  CHECK(m.linear_predictor(v) == doctest::Approx(0.1 + 0.75 - 0.4 + 0.9));
}
