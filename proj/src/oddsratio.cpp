#include "attmiss/oddsratio.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "attmiss/error.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/random.hpp"

namespace attmiss {

namespace {

std::size_t index_of(const std::vector<double>& points, double value) {
  const auto it = std::find(points.begin(), points.end(), value);
  if (it == points.end()) {
    throw Error(ErrorKind::config, "value " + std::to_string(value) + " is not a support point");
  }
  return static_cast<std::size_t>(it - points.begin());
}

void require_positive(double v, const char* what) {
  if (!(std::isfinite(v) && v > 0.0)) {
    throw Error(ErrorKind::divergent_normalizer,
                std::string(what) + " is " + std::to_string(v) + ", expected finite and positive");
  }
}

// Pieces shared by both normalizer routes and the reconstruction.
struct CellTerms {
  std::vector<double> g;  // chi(a, l | c) f(l | a0, c) / f(l0 | a0, c)
  std::vector<double> d;  // integral of chi(l, y | a, c) f(y | l0, a, c) dy
  double g_ref = 0.0;
  double d_ref = 0.0;
};

CellTerms cell_terms(const Factorization& f, int a, double c) {
  const Cell cell{a, c};
  const double base_ref = f.baseline_l(f.l0, c);
  require_positive(base_ref, "f(l0 | a0, c)");
  const auto integrate_y = [&](double l) {
    CompensatedSum s;
    for (std::size_t j = 0; j < f.y_support.size(); ++j) {
      const double y = f.y_support.points[j];
      s.add(f.y_support.weights[j] * f.chi_ly(l, y, cell) * f.baseline_y(y, a, c));
    }
    return s.value();
  };
  CellTerms t;
  for (const double l : f.l_support.points) {
    const double g = f.chi_al(a, l, cell) * f.baseline_l(l, c) / base_ref;
    const double d = integrate_y(l);
    require_positive(d, "integral of chi(l, y) f(y | l0)");
    if (!std::isfinite(g) || g < 0.0) require_positive(g, "chi(a, l) f(l | a0)");
    t.g.push_back(g);
    t.d.push_back(d);
  }
  t.g_ref = f.chi_al(a, f.l0, cell);
  t.d_ref = integrate_y(f.l0);
  require_positive(t.d_ref, "integral of chi(l0, y) f(y | l0)");
  return t;
}

}  // namespace

OddsRatioFn OddsRatioFn::identity() {
  return {[](double, double, const Cell&) { return 1.0; }, 0.0, 0.0};
}

OddsRatioFn OddsRatioFn::log_bilinear(double coef, double u0, double v0) {
  return {[=](double u, double v, const Cell&) { return std::exp(coef * (u - u0) * (v - v0)); },
          u0, v0};
}

OddsRatioFn odds_ratio_from_table(const Eigen::MatrixXd& table, std::vector<double> u_points,
                                  std::vector<double> v_points, double u0, double v0) {
  if (static_cast<std::size_t>(table.rows()) != u_points.size() ||
      static_cast<std::size_t>(table.cols()) != v_points.size()) {
    throw Error(ErrorKind::config, "odds-ratio table does not match its supports");
  }
  if (!(table.array() > 0.0).all() || !table.allFinite()) {
    throw Error(ErrorKind::undefined_odds_ratio,
                "odds ratio is undefined for a table with a zero cell");
  }
  const std::size_t iu0 = index_of(u_points, u0);
  const std::size_t iv0 = index_of(v_points, v0);
  auto t = std::make_shared<const Eigen::MatrixXd>(table);
  auto us = std::make_shared<const std::vector<double>>(std::move(u_points));
  auto vs = std::make_shared<const std::vector<double>>(std::move(v_points));
  OddsRatioFn fn;
  fn.u0 = u0;
  fn.v0 = v0;
  fn.eval = [=](double u, double v, const Cell&) {
    const auto iu = static_cast<Eigen::Index>(index_of(*us, u));
    const auto iv = static_cast<Eigen::Index>(index_of(*vs, v));
    const auto ru = static_cast<Eigen::Index>(iu0);
    const auto rv = static_cast<Eigen::Index>(iv0);
    return (*t)(iu, iv) * (*t)(ru, rv) / ((*t)(ru, iv) * (*t)(iu, rv));
  };
  return fn;
}

double normalizer_K(const Factorization& f, int a, double c, NormalizerRoute route) {
  const CellTerms t = cell_terms(f, a, c);
  const auto& wl = f.l_support.weights;
  double k = 0.0;
  if (route == NormalizerRoute::marginal) {
    CompensatedSum s;
    for (std::size_t i = 0; i < t.g.size(); ++i) s.add(wl[i] * t.g[i]);
    k = s.value();
  } else {
    // f(l | y0, a, c) is proportional to g(l) / D(l) because chi(l, y0) = 1.
    CompensatedSum norm;
    for (std::size_t i = 0; i < t.g.size(); ++i) norm.add(wl[i] * t.g[i] / t.d[i]);
    require_positive(norm.value(), "normalizer of f(l | y0)");
    const double f_ref = t.g_ref / t.d_ref / norm.value();
    require_positive(f_ref, "f(l0 | y0, a, c)");
    const Cell cell{a, c};
    CompensatedSum s;
    for (std::size_t i = 0; i < t.g.size(); ++i) {
      const double l = f.l_support.points[i];
      const double f_l = t.g[i] / t.d[i] / norm.value();
      for (std::size_t j = 0; j < f.y_support.size(); ++j) {
        const double y = f.y_support.points[j];
        s.add(wl[i] * f.y_support.weights[j] * f.chi_ly(l, y, cell) * f_l * f.baseline_y(y, a, c));
      }
    }
    k = s.value() / f_ref;
  }
  require_positive(k, "K(a, c)");
  return k;
}

Eigen::MatrixXd reconstruct_joint(const Factorization& f, int a, double c) {
  const double k = normalizer_K(f, a, c);
  const CellTerms t = cell_terms(f, a, c);
  const Cell cell{a, c};
  Eigen::MatrixXd joint(static_cast<Eigen::Index>(f.l_support.size()),
                        static_cast<Eigen::Index>(f.y_support.size()));
  for (std::size_t i = 0; i < f.l_support.size(); ++i) {
    const double l = f.l_support.points[i];
    for (std::size_t j = 0; j < f.y_support.size(); ++j) {
      const double y = f.y_support.points[j];
      joint(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          f.chi_ly(l, y, cell) * f.baseline_y(y, a, c) / k * t.g[i] / t.d[i];
    }
  }
  return joint;
}

double reconstruct_propensity(const OddsRatioFn& chi_al, double baseline_a1, double l, double c) {
  const Cell cell{0, c};
  const double treated = chi_al(1.0, l, cell) * baseline_a1;
  const double control = chi_al(0.0, l, cell) * (1.0 - baseline_a1);
  return treated / (treated + control);
}

Eigen::MatrixXd DiscreteJoint::conditional(int a) const {
  const auto& m = mass[static_cast<std::size_t>(a)];
  return m / m.sum();
}

double DiscreteJoint::propensity(std::size_t l_index) const {
  const auto i = static_cast<Eigen::Index>(l_index);
  const double treated = mass[1].row(i).sum();
  return treated / (treated + mass[0].row(i).sum());
}

DiscreteJoint random_discrete_joint(std::size_t l_size, std::size_t y_size, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::oracle, 0));
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  DiscreteJoint joint;
  for (std::size_t i = 0; i < l_size; ++i) joint.l_points.push_back(static_cast<double>(i));
  for (std::size_t j = 0; j < y_size; ++j) joint.y_points.push_back(static_cast<double>(j));
  double total = 0.0;
  for (auto& m : joint.mass) {
    m.resize(static_cast<Eigen::Index>(l_size), static_cast<Eigen::Index>(y_size));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = unif(rng);
    }
    total += m.sum();
  }
  for (auto& m : joint.mass) m /= total;
  return joint;
}

Factorization extract_factorization(const DiscreteJoint& joint, int a0, double l0, double y0) {
  auto cond = std::make_shared<std::array<Eigen::MatrixXd, 2>>(
      std::array<Eigen::MatrixXd, 2>{joint.conditional(0), joint.conditional(1)});
  auto ls = std::make_shared<const std::vector<double>>(joint.l_points);
  auto ys = std::make_shared<const std::vector<double>>(joint.y_points);
  const auto il0 = static_cast<Eigen::Index>(index_of(*ls, l0));
  index_of(*ys, y0);

  Factorization f;
  f.a0 = a0;
  f.l0 = l0;
  f.y0 = y0;
  f.l_support = discrete_support(joint.l_points);
  f.y_support = discrete_support(joint.y_points);

  const std::array<OddsRatioFn, 2> chi_ly{
      odds_ratio_from_table((*cond)[0], joint.l_points, joint.y_points, l0, y0),
      odds_ratio_from_table((*cond)[1], joint.l_points, joint.y_points, l0, y0)};
  f.chi_ly = {[chi_ly](double l, double y, const Cell& cell) {
                return chi_ly[static_cast<std::size_t>(cell.a)](l, y, cell);
              },
              l0, y0};

  Eigen::MatrixXd l_given_a(2, static_cast<Eigen::Index>(ls->size()));
  for (int a = 0; a < 2; ++a) l_given_a.row(a) = (*cond)[static_cast<std::size_t>(a)].rowwise().sum().transpose();
  f.chi_al = odds_ratio_from_table(l_given_a, {0.0, 1.0}, joint.l_points,
                                   static_cast<double>(a0), l0);

  f.baseline_l = [cond, ls, a0](double l, double) {
    return (*cond)[static_cast<std::size_t>(a0)].row(static_cast<Eigen::Index>(index_of(*ls, l))).sum();
  };
  f.baseline_y = [cond, ys, il0](double y, int a, double) {
    const auto& m = (*cond)[static_cast<std::size_t>(a)];
    return m(il0, static_cast<Eigen::Index>(index_of(*ys, y))) / m.row(il0).sum();
  };
  return f;
}

Table3 random_table3(std::size_t n1, std::size_t n2, std::size_t n3, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::oracle, 1));
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Table3 t{n1, n2, n3, std::vector<double>(n1 * n2 * n3)};
  double total = 0.0;
  for (auto& v : t.p) total += (v = unif(rng));
  for (auto& v : t.p) v /= total;
  return t;
}

Lemma1Inputs lemma1_inputs(const Table3& joint) {
  const auto n1 = static_cast<Eigen::Index>(joint.n1);
  const auto n2 = static_cast<Eigen::Index>(joint.n2);
  Lemma1Inputs in;
  in.x1_given_x2 = Eigen::MatrixXd::Zero(n1, n2);
  in.x1_given_x2x3.assign(joint.n3, Eigen::MatrixXd::Zero(n1, n2));
  in.x3_given_x2_ref = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(joint.n3), n2);
  for (std::size_t j = 0; j < joint.n2; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    double x2_total = 0.0;
    for (std::size_t i = 0; i < joint.n1; ++i) {
      for (std::size_t k = 0; k < joint.n3; ++k) {
        in.x1_given_x2(static_cast<Eigen::Index>(i), jj) += joint.at(i, j, k);
        x2_total += joint.at(i, j, k);
      }
    }
    in.x1_given_x2.col(jj) /= x2_total;
    double ref_total = 0.0;
    for (std::size_t k = 0; k < joint.n3; ++k) {
      double x23_total = 0.0;
      for (std::size_t i = 0; i < joint.n1; ++i) x23_total += joint.at(i, j, k);
      for (std::size_t i = 0; i < joint.n1; ++i) {
        in.x1_given_x2x3[k](static_cast<Eigen::Index>(i), jj) = joint.at(i, j, k) / x23_total;
      }
      in.x3_given_x2_ref(static_cast<Eigen::Index>(k), jj) = joint.at(0, j, k);
      ref_total += joint.at(0, j, k);
    }
    in.x3_given_x2_ref.col(jj) /= ref_total;
  }
  return in;
}

double lemma1_residual(const Lemma1Inputs& in) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < in.x1_given_x2.rows(); ++i) {
    for (Eigen::Index j = 0; j < in.x1_given_x2.cols(); ++j) {
      const double lhs = in.x1_given_x2(i, j) / in.x1_given_x2(0, j);
      CompensatedSum rhs;
      for (std::size_t k = 0; k < in.x1_given_x2x3.size(); ++k) {
        const auto& t = in.x1_given_x2x3[k];
        rhs.add(t(i, j) / t(0, j) * in.x3_given_x2_ref(static_cast<Eigen::Index>(k), j));
      }
      worst = std::max(worst, std::abs(lhs - rhs.value()));
    }
  }
  return worst;
}

IncompatibilityGap incompatibility_gap(const LogisticIncompatibility& ex) {
  if (ex.c_grid.empty()) throw Error(ErrorKind::config, "incompatibility grid is empty");
  const auto& phi = ex.phi;
  const auto& g = ex.gamma;
  const auto rows = static_cast<Eigen::Index>(2 * ex.c_grid.size());
  Eigen::MatrixXd x(rows, 3);
  Eigen::VectorXd marginal(rows);
  Eigen::Index k = 0;
  for (const double c : ex.c_grid) {
    for (int a = 0; a < 2; ++a) {
      const double py1 = expit(g[0] + g[1] * a + g[2] * c);
      const double pl1 = (1.0 - py1) * expit(phi[0] + phi[1] * a + phi[3] * c) +
                         py1 * expit(phi[0] + phi[1] * a + phi[2] + phi[3] * c);
      x.row(k) << 1.0, a, c;
      marginal[k] = logit(pl1);
      ++k;
    }
  }
  const Eigen::VectorXd coef = x.colPivHouseholderQr().solve(marginal);
  IncompatibilityGap gap;
  gap.linear = (marginal - x * coef).lpNorm<Eigen::Infinity>();
  for (Eigen::Index r = 0; r < rows; r += 2) {
    gap.odds_ratio = std::max(gap.odds_ratio, std::abs(marginal[r + 1] - marginal[r] - ex.lambda1));
  }
  return gap;
}

double normal_incompatibility_gap(double phi2, double nu2, double sigma_l_sq, double sigma_y_sq,
                                  const std::vector<double>& l_grid,
                                  const std::vector<double>& y_grid) {
  double worst = 0.0;
  for (const double l : l_grid) {
    for (const double y : y_grid) {
      worst = std::max(worst, std::abs(2.0 * phi2 * y / sigma_l_sq -
                                       3.0 * nu2 * l * l / sigma_y_sq));
    }
  }
  return worst;
}

}  // namespace attmiss
