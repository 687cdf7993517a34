#include "attmiss/glm.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "attmiss/error.hpp"
#include "attmiss/numeric.hpp"

namespace attmiss {

const char* column_name(Column column) {
  switch (column) {
    case Column::y: return "y";
    case Column::a: return "a";
    case Column::c: return "c";
    case Column::l: return "l";
    case Column::r: return "r";
  }
  return "?";
}

bool DesignSpec::uses(Column column) const {
  for (const auto& term : terms) {
    for (const auto col : term) {
      if (col == column) return true;
    }
  }
  return false;
}

std::string DesignSpec::term_name(std::size_t coefficient) const {
  if (intercept) {
    if (coefficient == 0) return "(intercept)";
    --coefficient;
  }
  std::string name;
  for (const auto col : terms.at(coefficient)) {
    if (!name.empty()) name += ":";
    name += column_name(col);
  }
  return name;
}

std::string DesignSpec::formula() const {
  std::ostringstream out;
  out << column_name(response) << " ~ " << (intercept ? "1" : "0");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    out << " + " << term_name(k + (intercept ? 1 : 0));
  }
  return out.str();
}

DesignSpec main_effects(Column response, std::initializer_list<Column> covariates) {
  DesignSpec spec;
  spec.response = response;
  for (const auto col : covariates) spec.terms.push_back({col});
  return spec;
}

double RowValues::get(Column column) const {
  switch (column) {
    case Column::y: return y;
    case Column::a: return a;
    case Column::c: return c;
    case Column::l: return l;
    case Column::r: return r;
  }
  return 0.0;
}

RowValues RowValues::of(const ObservedRecord& record) {
  return {record.y, static_cast<double>(record.a), record.c,
          record.l.value_or(std::numeric_limits<double>::quiet_NaN()),
          static_cast<double>(record.r)};
}

void design_row(const DesignSpec& design, const RowValues& values,
                Eigen::Ref<Eigen::VectorXd> out) {
  Eigen::Index k = 0;
  if (design.intercept) out[k++] = 1.0;
  for (const auto& term : design.terms) {
    double v = 1.0;
    for (const auto col : term) v *= values.get(col);
    out[k++] = v;
  }
}

Eigen::VectorXd design_row(const DesignSpec& design, const RowValues& values) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(design.width()));
  design_row(design, values, row);
  return row;
}

Eigen::MatrixXd design_matrix(const Dataset& dataset, const DesignSpec& design) {
  const bool needs_l = design.uses(Column::l) || design.response == Column::l;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dataset.n()),
                    static_cast<Eigen::Index>(design.width()));
  Eigen::VectorXd row(x.cols());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    if (needs_l && !dataset[i].l) {
      throw Error(ErrorKind::config, "design '" + design.formula() +
                                         "' needs l but record " + std::to_string(i) +
                                         " has it missing");
    }
    design_row(design, RowValues::of(dataset[i]), row);
    x.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return x;
}

Eigen::VectorXd response_vector(const Dataset& dataset, const DesignSpec& design) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(dataset.n()));
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    y[static_cast<Eigen::Index>(i)] = RowValues::of(dataset[i]).get(design.response);
  }
  return y;
}

namespace {

double logistic_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w) {
  CompensatedSum s;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    s.add(w[i] * (y[i] * eta[i] - log1pexp(eta[i])));
  }
  return s.value();
}

}  // namespace

FitResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& weights, const LogisticOptions& options,
                       const std::vector<std::string>& term_names) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(n) : weights;
  if (y.size() != n || w.size() != n) {
    throw Error(ErrorKind::config, "fit_logistic: dimension mismatch");
  }
  double w_total = 0.0;
  double w_success = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw Error(ErrorKind::config, "fit_logistic: response must be 0 or 1");
    }
    if (!(w[i] > 0.0)) {
      throw Error(ErrorKind::config, "fit_logistic: weights must be positive");
    }
    w_total += w[i];
    w_success += w[i] * y[i];
  }
  if (n == 0 || w_success == 0.0 || w_success == w_total) {
    throw Error(ErrorKind::degenerate_response,
                "response is constant; the likelihood has no interior maximum");
  }

  const auto name_of = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(term_names.size())
               ? term_names[static_cast<std::size_t>(j)]
               : "coefficient " + std::to_string(j);
  };

  FitResult result;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = x * beta;
  double loglik = logistic_loglik(eta, y, w);
  Eigen::VectorXd mu(n);
  Eigen::VectorXd grad(p);

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = expit(eta[i]);
    grad = x.transpose() * (w.array() * (y - mu).array()).matrix() / w_total;
    result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    result.iterations = iter;
    if (result.gradient_norm <= options.tolerance) {
      result.converged = true;
      break;
    }
    if (iter == options.max_iterations) break;

    const Eigen::VectorXd curvature = (w.array() * mu.array() * (1.0 - mu.array())).matrix();
    const Eigen::MatrixXd info =
        x.transpose() * curvature.asDiagonal() * x / w_total;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      throw Error(ErrorKind::singular_design, "logistic information matrix is singular");
    }
    const Eigen::VectorXd step = ldlt.solve(grad);

    double t = 1.0;
    Eigen::VectorXd candidate;
    double candidate_ll = -std::numeric_limits<double>::infinity();
    for (int halving = 0; halving < 40; ++halving) {
      candidate = beta + t * step;
      eta = x * candidate;
      candidate_ll = logistic_loglik(eta, y, w);
      if (candidate_ll >= loglik - 1e-12 * std::abs(loglik)) break;
      t *= 0.5;
    }
    beta = candidate;
    loglik = candidate_ll;

    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(beta[j]) > options.separation_bound) {
        throw Error(ErrorKind::non_convergence,
                    "separation: coefficient on '" + name_of(j) + "' reached " +
                        std::to_string(beta[j]) + " (bound " +
                        std::to_string(options.separation_bound) + ")");
      }
    }
  }

  result.coefficients = beta;
  result.log_likelihood = loglik;
  return result;
}

FitResult fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& weights) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(n) : weights;
  if (y.size() != n || w.size() != n) {
    throw Error(ErrorKind::config, "fit_linear: dimension mismatch");
  }
  if ((w.array() <= 0.0).any()) {
    throw Error(ErrorKind::config, "fit_linear: weights must be positive");
  }
  const double w_total = w.sum();
  if (w_total <= static_cast<double>(p)) {
    throw Error(ErrorKind::singular_design, "fewer observations than coefficients");
  }

  const Eigen::ArrayXd sw = w.array().sqrt();
  const Eigen::MatrixXd xw = x.array().colwise() * sw;
  const Eigen::VectorXd yw = (y.array() * sw).matrix();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  if (qr.rank() < p) {
    throw Error(ErrorKind::singular_design,
                "design has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p));
  }

  FitResult result;
  result.coefficients = qr.solve(yw);
  const Eigen::VectorXd resid = y - x * result.coefficients;
  const double wrss = (w.array() * resid.array().square()).sum();
  result.residual_variance = wrss / (w_total - static_cast<double>(p));
  result.gradient_norm =
      (x.transpose() * (w.array() * resid.array()).matrix() / w_total).lpNorm<Eigen::Infinity>();
  result.converged = true;
  result.iterations = 1;
  const double sigma2_ml = wrss / w_total;
  result.log_likelihood =
      sigma2_ml > 0.0
          ? -0.5 * w_total * (std::log(2.0 * M_PI * sigma2_ml) + 1.0)
          : std::numeric_limits<double>::infinity();
  return result;
}

double FittedModel::linear_predictor(const RowValues& values) const {
  return design_row(design, values).dot(fit.coefficients);
}

double FittedModel::mean(const RowValues& values) const {
  const double lp = linear_predictor(values);
  return link == Link::logit ? expit(lp) : lp;
}

double FittedModel::l_slope(const RowValues& values) const {
  if (!design.uses(Column::l)) return 0.0;
  RowValues at0 = values;
  RowValues at1 = values;
  at0.l = 0.0;
  at1.l = 1.0;
  return linear_predictor(at1) - linear_predictor(at0);
}

namespace {

std::vector<std::string> term_names(const DesignSpec& design) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < design.width(); ++j) names.push_back(design.term_name(j));
  return names;
}

}  // namespace

FittedModel fit_logistic(const Dataset& dataset, const DesignSpec& design,
                         const Eigen::VectorXd& weights) {
  FittedModel model{design, Link::logit, {}};
  model.fit = fit_logistic(design_matrix(dataset, design), response_vector(dataset, design),
                           weights, LogisticOptions{}, term_names(design));
  return model;
}

FittedModel fit_linear(const Dataset& dataset, const DesignSpec& design,
                       const Eigen::VectorXd& weights) {
  FittedModel model{design, Link::identity, {}};
  model.fit = fit_linear(design_matrix(dataset, design), response_vector(dataset, design),
                         weights);
  return model;
}

FittedModel fit_ipw_logistic(const Dataset& dataset, const FittedModel& missingness,
                             const DesignSpec& design) {
  const Dataset cc = complete_cases(dataset);
  Eigen::VectorXd weights(static_cast<Eigen::Index>(cc.n()));
  for (std::size_t i = 0; i < cc.n(); ++i) {
    const double pi_hat = missingness.mean(RowValues::of(cc[i]));
    if (!(pi_hat >= kWeightFloor)) {
      throw Error(ErrorKind::positivity,
                  "fitted observation probability " + std::to_string(pi_hat) +
                      " below floor for a complete case");
    }
    weights[static_cast<Eigen::Index>(i)] = 1.0 / pi_hat;
  }
  return fit_logistic(cc, design, weights);
}

}  // namespace attmiss
