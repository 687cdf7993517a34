#include "attmiss/reparam.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>

#include "attmiss/error.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/optimize.hpp"
#include "attmiss/random.hpp"

namespace attmiss {

using P = ReparamParams;
using Vec = Eigen::Matrix<double, P::kSize, 1>;

double ReparamParams::sigma_j_sq() const { return std::exp(values[log_sigma_j_sq]); }
double ReparamParams::sigma_r_sq() const { return std::exp(values[log_sigma_r_sq]); }

double ReparamParams::mean_l(int a, double c) const {
  return values[alpha0] + values[alpha_c] * c + values[beta] * sigma_j_sq() * a;
}

double ReparamParams::mean_y(int a, double c, double l) const {
  return values[theta_r0] + values[theta_ra] * a + values[theta_rc] * c +
         values[omega] * sigma_r_sq() * l;
}

const std::array<const char*, P::kSize>& ReparamParams::names() {
  static const std::array<const char*, kSize> n{"alpha0",   "alpha_c",  "log_sigma_j_sq",
                                                "omega",    "beta",     "theta_r0",
                                                "theta_ra", "theta_rc", "log_sigma_r_sq"};
  return n;
}

namespace {

// Derivatives of mu_L and of mu_Y (at fixed l) with respect to the parameters.
Vec d_mean_l(const P& p, int a, double c) {
  Vec d = Vec::Zero();
  d[P::alpha0] = 1.0;
  d[P::alpha_c] = c;
  d[P::beta] = a * p.sigma_j_sq();
  d[P::log_sigma_j_sq] = p[P::beta] * a * p.sigma_j_sq();
  return d;
}

Vec d_mean_y(const P& p, int a, double c, double l) {
  Vec d = Vec::Zero();
  d[P::theta_r0] = 1.0;
  d[P::theta_ra] = a;
  d[P::theta_rc] = c;
  d[P::omega] = p.sigma_r_sq() * l;
  d[P::log_sigma_r_sq] = p[P::omega] * p.sigma_r_sq() * l;
  return d;
}

}  // namespace

double record_loglik(const ReparamParams& p, const ObservedRecord& rec, const GaussHermite& rule,
                     Eigen::VectorXd* grad) {
  const double sj2 = p.sigma_j_sq();
  const double sr2 = p.sigma_r_sq();
  const double mu_l = p.mean_l(rec.a, rec.c);

  if (rec.l) {
    const double l = *rec.l;
    const double e_l = l - mu_l;
    const double e_y = rec.y - p.mean_y(rec.a, rec.c, l);
    if (grad) {
      Vec g = e_l / sj2 * d_mean_l(p, rec.a, rec.c) + e_y / sr2 * d_mean_y(p, rec.a, rec.c, l);
      g[P::log_sigma_j_sq] += -0.5 + 0.5 * e_l * e_l / sj2;
      g[P::log_sigma_r_sq] += -0.5 + 0.5 * e_y * e_y / sr2;
      *grad += g;
    }
    return normal_log_pdf(l, mu_l, sj2) + normal_log_pdf(rec.y, p.mean_y(rec.a, rec.c, l), sr2);
  }

  const double sj = std::sqrt(sj2);
  const std::size_t order = rule.nodes.size();
  std::vector<double> log_terms(order);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < order; ++k) {
    const double l = mu_l + sj * rule.nodes[k];
    log_terms[k] = std::log(rule.weights[k]) + normal_log_pdf(rec.y, p.mean_y(rec.a, rec.c, l), sr2);
    top = std::max(top, log_terms[k]);
  }
  CompensatedSum total;
  for (const double t : log_terms) total.add(std::exp(t - top));
  const double value = top + std::log(total.value());

  if (grad) {
    const Vec dmu_l = d_mean_l(p, rec.a, rec.c);
    Vec g = Vec::Zero();
    for (std::size_t k = 0; k < order; ++k) {
      const double q = std::exp(log_terms[k] - value);
      const double l = mu_l + sj * rule.nodes[k];
      const double e_y = rec.y - p.mean_y(rec.a, rec.c, l);
      Vec dl = dmu_l;
      dl[P::log_sigma_j_sq] += 0.5 * sj * rule.nodes[k];
      Vec dmu_y = d_mean_y(p, rec.a, rec.c, l) + p[P::omega] * sr2 * dl;
      Vec term = e_y / sr2 * dmu_y;
      term[P::log_sigma_r_sq] += -0.5 + 0.5 * e_y * e_y / sr2;
      g += q * term;
    }
    *grad += g;
  }
  return value;
}

namespace {

[[noreturn]] void non_finite_record(std::size_t i, double v) {
  std::ostringstream msg;
  msg << "log-likelihood term of record " << i << " is " << v;
  throw Error(ErrorKind::non_finite, msg.str());
}

}  // namespace

double observed_loglik(const ReparamParams& params, const Dataset& dataset, int order,
                       Eigen::VectorXd* grad) {
  if (dataset.empty()) throw Error(ErrorKind::config, "log-likelihood of an empty dataset");
  const auto rule = gauss_hermite(order);
  CompensatedSum sum;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(P::kSize);
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const double v = record_loglik(params, dataset[i], rule, grad ? &g : nullptr);
    if (!std::isfinite(v)) non_finite_record(i, v);
    sum.add(v);
  }
  const double n = static_cast<double>(dataset.n());
  if (grad) *grad = g / n;
  return sum.value() / n;
}

double observed_loglik(const ReparamParams& params, const Dataset& dataset,
                       const Support& l_support) {
  if (dataset.empty()) throw Error(ErrorKind::config, "log-likelihood of an empty dataset");
  CompensatedSum sum;
  const double sj2 = params.sigma_j_sq();
  const double sr2 = params.sigma_r_sq();
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto& rec = dataset[i];
    const double mu_l = params.mean_l(rec.a, rec.c);
    const auto joint = [&](double l) {
      return normal_pdf(l, mu_l, sj2) * normal_pdf(rec.y, params.mean_y(rec.a, rec.c, l), sr2);
    };
    double v = 0.0;
    if (rec.l) {
      v = std::log(joint(*rec.l));
    } else {
      CompensatedSum integral;
      for (std::size_t k = 0; k < l_support.size(); ++k) {
        integral.add(l_support.weights[k] * joint(l_support.points[k]));
      }
      v = std::log(integral.value());
    }
    if (!std::isfinite(v)) non_finite_record(i, v);
    sum.add(v);
  }
  return sum.value() / static_cast<double>(dataset.n());
}

ReparamFit fit_reparam_mle(const Dataset& dataset, const ReparamParams& initial, int order,
                           const std::array<bool, P::kSize>& fixed) {
  std::vector<int> free;
  for (int j = 0; j < P::kSize; ++j) {
    if (!fixed[static_cast<std::size_t>(j)]) free.push_back(j);
  }
  const auto k = static_cast<Eigen::Index>(free.size());
  const auto expand = [&](const Eigen::VectorXd& x) {
    ReparamParams p = initial;
    for (Eigen::Index j = 0; j < k; ++j) p.values[free[static_cast<std::size_t>(j)]] = x[j];
    return p;
  };
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    Eigen::VectorXd g(P::kSize);
    double v = 0.0;
    try {
      v = observed_loglik(expand(x), dataset, order, grad ? &g : nullptr);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::non_finite) throw;
      return std::numeric_limits<double>::infinity();
    }
    if (grad) {
      grad->resize(k);
      for (Eigen::Index j = 0; j < k; ++j) (*grad)[j] = -g[free[static_cast<std::size_t>(j)]];
    }
    return -v;
  };

  Eigen::VectorXd x0(k);
  for (Eigen::Index j = 0; j < k; ++j) x0[j] = initial.values[free[static_cast<std::size_t>(j)]];
  if (!std::isfinite(objective(x0, nullptr))) {
    throw Error(ErrorKind::non_finite, "log-likelihood is not finite at the initial parameters");
  }
  const auto result = minimize_bfgs(objective, x0, BfgsOptions{1e-6, 1000});

  ReparamFit fit;
  fit.params = expand(result.x);
  fit.loglik = -result.value;
  fit.gradient_norm = result.gradient.size() ? result.gradient.lpNorm<Eigen::Infinity>() : 0.0;
  fit.iterations = result.iterations;
  fit.trace = result.trace;
  if (!result.converged) {
    std::ostringstream msg;
    msg << "quasi-Newton stopped after " << result.iterations
        << " iterations with gradient max-norm " << fit.gradient_norm << "; objective trace:";
    const std::size_t start = fit.trace.size() > 5 ? fit.trace.size() - 5 : 0;
    for (std::size_t i = start; i < fit.trace.size(); ++i) msg << ' ' << -fit.trace[i];
    throw Error(ErrorKind::non_convergence, msg.str());
  }

  fit.se = Eigen::VectorXd::Zero(P::kSize);
  if (k > 0) {
    const Eigen::MatrixXd hessian = fd_hessian(objective, result.x);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian * static_cast<double>(dataset.n()));
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorKind::singular_information, "observed information is not positive definite");
    }
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    for (Eigen::Index j = 0; j < k; ++j) {
      fit.se[free[static_cast<std::size_t>(j)]] = std::sqrt(cov(j, j));
    }
  }
  return fit;
}

ReparamParams complete_data_mle(const Dataset& dataset) {
  const Dataset cc = complete_cases(dataset);
  const auto l_fit = fit_linear(cc, main_effects(Column::l, {Column::a, Column::c}));
  const auto y_fit = fit_linear(cc, main_effects(Column::y, {Column::a, Column::c, Column::l}));
  const double n = static_cast<double>(cc.n());
  const double sj2 = *l_fit.fit.residual_variance * (n - 3.0) / n;
  const double sr2 = *y_fit.fit.residual_variance * (n - 4.0) / n;
  const auto& a = l_fit.coefficients();
  const auto& b = y_fit.coefficients();
  ReparamParams p;
  p[P::alpha0] = a[0];
  p[P::alpha_c] = a[2];
  p[P::beta] = a[1] / sj2;
  p[P::log_sigma_j_sq] = std::log(sj2);
  p[P::theta_r0] = b[0];
  p[P::theta_ra] = b[1];
  p[P::theta_rc] = b[2];
  p[P::omega] = b[3] / sr2;
  p[P::log_sigma_r_sq] = std::log(sr2);
  return p;
}

Dataset simulate_reparam_family(const ReparamParams& params, const Eigen::Vector4d& eta,
                                std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::data, 0));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sj = std::sqrt(params.sigma_j_sq());
  const double sr = std::sqrt(params.sigma_r_sq());
  std::vector<ObservedRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = normal(rng) + unif(rng);
    const int a = unit(rng) < expit(0.3 * c) ? 1 : 0;
    const double l = params.mean_l(a, c) + sj * normal(rng);
    const double y = params.mean_y(a, c, l) + sr * normal(rng);
    const bool observed = unit(rng) < expit(eta[0] + eta[1] * a + eta[2] * c + eta[3] * y);
    records.push_back(observed ? ObservedRecord::complete(y, a, c, l)
                               : ObservedRecord::missing(y, a, c));
  }
  return Dataset(std::move(records));
}

FittedModel fit_h_kappa(const Dataset& dataset, const FittedModel& missingness) {
  return fit_ipw_logistic(dataset, missingness, main_effects(Column::a, {Column::l, Column::c}));
}

double h_kappa(const FittedModel& model, double c) {
  RowValues values;
  values.c = c;
  values.l = 0.0;
  return model.mean(values);
}

}  // namespace attmiss
