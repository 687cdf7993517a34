#include "attmiss/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "attmiss/error.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/parallel.hpp"
#include "attmiss/random.hpp"

namespace attmiss {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Offsets {
  bool has_eta = false;
  Index eta = 0, lambda = 0, phi = 0, sigma = 0, nu = 0, dim = 0;
};

Offsets offsets(const NuisanceFits& fits) {
  Offsets o;
  Index k = 0;
  o.has_eta = fits.missingness.has_value();
  o.eta = k;
  if (o.has_eta) k += fits.missingness->coefficients().size();
  o.lambda = k;
  k += fits.propensity.coefficients().size();
  o.phi = k;
  k += fits.confounder.coefficients().size();
  o.sigma = k;
  k += 1;
  o.nu = k;
  k += fits.outcome.coefficients().size();
  o.dim = k;
  return o;
}

double variance_factor(const Dataset& dataset, const NuisanceFits& fits) {
  const auto n_cc = static_cast<double>(dataset.count_observed());
  const auto p = static_cast<double>(fits.confounder.coefficients().size());
  return n_cc / (n_cc - p);
}

RowValues with_l(RowValues v, double l) {
  v.l = l;
  return v;
}

RowValues with_a(RowValues v, double a) {
  v.a = a;
  return v;
}

// Shared per-record quantities for the conditional-expectation terms.
struct CondPieces {
  VectorXd xa0, sa;  // propensity row at l = 0 and its l-slope direction
  VectorXd xt0, xt1;  // confounder rows at a = 0 and a = 1
  VectorXd xm_lstar, xm_mu1, sm;  // outcome rows (a = 0) and l-slope direction
  double lambda_l = 0, nu_l = 0, mu0 = 0, mu1 = 0, lstar = 0, e = 0, zeta = 0, v4 = 0;
};

CondPieces cond_pieces(const RowValues& vals, const NuisanceFits& fits) {
  CondPieces c;
  const double s2 = fits.sigma_l_sq();
  c.xa0 = design_row(fits.propensity.design, with_l(vals, 0.0));
  c.sa = design_row(fits.propensity.design, with_l(vals, 1.0)) - c.xa0;
  c.lambda_l = c.sa.dot(fits.lambda());
  c.xt0 = design_row(fits.confounder.design, with_a(vals, 0.0));
  c.xt1 = design_row(fits.confounder.design, with_a(vals, 1.0));
  c.mu0 = c.xt0.dot(fits.phi());
  c.mu1 = c.xt1.dot(fits.phi());
  const RowValues control = with_a(vals, 0.0);
  const VectorXd xm_zero = design_row(fits.outcome.design, with_l(control, 0.0));
  c.sm = design_row(fits.outcome.design, with_l(control, 1.0)) - xm_zero;
  c.nu_l = c.sm.dot(fits.nu());
  c.lstar = c.mu0 + s2 * c.lambda_l;
  c.xm_lstar = xm_zero + c.lstar * c.sm;
  c.xm_mu1 = xm_zero + c.mu1 * c.sm;
  c.e = std::exp(c.xa0.dot(fits.lambda()) + c.lambda_l * c.mu0 + 0.5 * s2 * c.lambda_l * c.lambda_l);
  c.zeta = c.e * c.xm_lstar.dot(fits.nu());
  c.v4 = c.xm_mu1.dot(fits.nu());
  return c;
}

}  // namespace

std::vector<ScoreBlock> score_blocks(const NuisanceFits& fits) {
  const Offsets o = offsets(fits);
  std::vector<ScoreBlock> blocks;
  if (o.has_eta) blocks.push_back({"missingness (eta)", o.eta, o.lambda - o.eta});
  blocks.push_back({"propensity (lambda)", o.lambda, o.phi - o.lambda});
  blocks.push_back({"confounder mean (phi)", o.phi, o.sigma - o.phi});
  blocks.push_back({"confounder variance", o.sigma, 1});
  blocks.push_back({"outcome (nu)", o.nu, o.dim - o.nu});
  return blocks;
}

Eigen::VectorXd pack_parameters(const NuisanceFits& fits) {
  const Offsets o = offsets(fits);
  VectorXd xi(o.dim);
  if (o.has_eta) xi.segment(o.eta, o.lambda - o.eta) = fits.missingness->coefficients();
  xi.segment(o.lambda, o.phi - o.lambda) = fits.lambda();
  xi.segment(o.phi, o.sigma - o.phi) = fits.phi();
  xi[o.sigma] = fits.sigma_l_sq();
  xi.segment(o.nu, o.dim - o.nu) = fits.nu();
  return xi;
}

NuisanceFits unpack_parameters(const NuisanceFits& like, const Eigen::VectorXd& xi) {
  const Offsets o = offsets(like);
  if (xi.size() != o.dim) throw Error(ErrorKind::config, "parameter vector has the wrong length");
  NuisanceFits fits = like;
  if (o.has_eta) fits.missingness->fit.coefficients = xi.segment(o.eta, o.lambda - o.eta);
  fits.propensity.fit.coefficients = xi.segment(o.lambda, o.phi - o.lambda);
  fits.confounder.fit.coefficients = xi.segment(o.phi, o.sigma - o.phi);
  fits.confounder.fit.residual_variance = xi[o.sigma];
  fits.outcome.fit.coefficients = xi.segment(o.nu, o.dim - o.nu);
  return fits;
}

ScoreStack score_stack(const Dataset& dataset, const NuisanceFits& fits, double psi) {
  const Offsets o = offsets(fits);
  const auto n = static_cast<Index>(dataset.n());
  const double k_var = variance_factor(dataset, fits);
  const double s2 = fits.sigma_l_sq();
  const auto draws = imputation_draws(dataset, fits.m_imputations, fits.imputation_seed);
  const double m = static_cast<double>(draws.m());
  const InfluenceContext ctx = make_context(dataset, fits);

  ScoreStack s;
  s.blocks = score_blocks(fits);
  s.q = MatrixXd::Zero(n, o.dim);
  s.z.resize(n);
  Index miss_row = 0;
  for (Index i = 0; i < n; ++i) {
    const auto& rec = dataset[static_cast<std::size_t>(i)];
    const RowValues vals = RowValues::of(rec);
    s.z[i] = iota_miss(rec, static_cast<std::size_t>(i), ctx, psi);
    const double pi = fits.pi_hat(vals);
    if (o.has_eta) {
      s.q.row(i).segment(o.eta, o.lambda - o.eta) =
          (rec.r - pi) * design_row(fits.missingness->design, vals).transpose();
    }
    if (rec.r == 1) {
      const VectorXd xa = design_row(fits.propensity.design, vals);
      s.q.row(i).segment(o.lambda, o.phi - o.lambda) =
          (rec.a - fits.propensity.mean(vals)) / pi * xa.transpose();
      const VectorXd xt = design_row(fits.confounder.design, vals);
      const double e_l = *rec.l - xt.dot(fits.phi());
      s.q.row(i).segment(o.phi, o.sigma - o.phi) = e_l * xt.transpose();
      s.q(i, o.sigma) = e_l * e_l * k_var - s2;
      const VectorXd xm = design_row(fits.outcome.design, vals);
      s.q.row(i).segment(o.nu, o.dim - o.nu) = (rec.y - xm.dot(fits.nu())) * xm.transpose();
    } else {
      VectorXd acc = VectorXd::Zero(o.dim - o.nu);
      for (int k = 0; k < draws.m(); ++k) {
        const double l = impute_l(fits.confounder, rec, draws.z(miss_row, k));
        const VectorXd xm = design_row(fits.outcome.design, with_l(vals, l));
        acc += (rec.y - xm.dot(fits.nu())) * xm;
      }
      s.q.row(i).segment(o.nu, o.dim - o.nu) = acc.transpose() / m;
      ++miss_row;
    }
  }
  return s;
}

ScoreDerivatives analytic_derivatives(const Dataset& dataset, const NuisanceFits& fits, double psi) {
  const Offsets o = offsets(fits);
  const Index n_eta = o.lambda - o.eta, n_lam = o.phi - o.lambda, n_phi = o.sigma - o.phi,
              n_nu = o.dim - o.nu;
  const double k_var = variance_factor(dataset, fits);
  const double s2 = fits.sigma_l_sq();
  const double sigma = std::sqrt(s2);
  const double pr1 = fits.pr_a1;
  const auto draws = imputation_draws(dataset, fits.m_imputations, fits.imputation_seed);
  const double m = static_cast<double>(draws.m());

  ScoreDerivatives d;
  d.dz = Eigen::RowVectorXd::Zero(o.dim);
  d.dq = MatrixXd::Zero(o.dim, o.dim);
  double dz_dpsi = 0.0;
  Index miss_row = 0;

  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto& rec = dataset[i];
    const RowValues vals = RowValues::of(rec);
    const double pi = fits.pi_hat(vals);
    const double ratio = rec.r == 1 ? 1.0 / pi : 0.0;
    const CondPieces c = cond_pieces(vals, fits);

    // E[iota_full | O] and its derivatives.
    double e_val = 0.0;
    VectorXd de = VectorXd::Zero(o.dim);
    if (rec.a == 0) {
      const VectorXd de_dlam = c.e * (c.xa0 + c.lstar * c.sa);
      const double m_star = c.xm_lstar.dot(fits.nu());
      e_val = (rec.y * c.e - c.zeta) / pr1;
      de.segment(o.lambda, n_lam) =
          (rec.y * de_dlam - (de_dlam * m_star + c.e * c.nu_l * s2 * c.sa)) / pr1;
      de.segment(o.phi, n_phi) =
          (rec.y * c.e * c.lambda_l - (c.lambda_l * c.zeta + c.e * c.nu_l)) / pr1 * c.xt0;
      de[o.sigma] = (rec.y * 0.5 * c.lambda_l * c.lambda_l * c.e -
                     (0.5 * c.lambda_l * c.lambda_l * c.zeta + c.e * c.nu_l * c.lambda_l)) /
                    pr1;
      de.segment(o.nu, n_nu) = -c.e / pr1 * c.xm_lstar;
    } else {
      e_val = (c.v4 - psi) / pr1;
      de.segment(o.phi, n_phi) = c.nu_l / pr1 * c.xt1;
      de.segment(o.nu, n_nu) = c.xm_mu1 / pr1;
      dz_dpsi -= 1.0 / pr1;
    }

    VectorXd dz = -(ratio - 1.0) * de;
    if (rec.r == 1) {
      const VectorXd xa = design_row(fits.propensity.design, vals);
      const double p = fits.propensity.mean(vals);
      const double od = p / (1.0 - p);
      const VectorXd xm0 = design_row(fits.outcome.design, with_a(vals, 0.0));
      const double mu0 = xm0.dot(fits.nu());
      double f_val = 0.0;
      VectorXd df = VectorXd::Zero(o.dim);
      if (rec.a == 0) {
        f_val = od * (rec.y - mu0) / pr1;
        df.segment(o.lambda, n_lam) = f_val * xa;
        df.segment(o.nu, n_nu) = -od / pr1 * xm0;
      } else {
        f_val = (mu0 - psi) / pr1;
        df.segment(o.nu, n_nu) = xm0 / pr1;
      }
      dz += ratio * df;
      if (o.has_eta) {
        const VectorXd xr = design_row(fits.missingness->design, vals);
        dz.segment(o.eta, n_eta) = -(1.0 - pi) / pi * (f_val - e_val) * xr;
      }

      // Propensity, confounder and outcome score derivatives for a complete case.
      d.dq.block(o.lambda, o.lambda, n_lam, n_lam) -= p * (1.0 - p) / pi * xa * xa.transpose();
      if (o.has_eta) {
        const VectorXd xr = design_row(fits.missingness->design, vals);
        d.dq.block(o.lambda, o.eta, n_lam, n_eta) -=
            (1.0 - pi) / pi * (rec.a - p) * xa * xr.transpose();
      }
      const VectorXd xt = design_row(fits.confounder.design, vals);
      const double e_l = *rec.l - xt.dot(fits.phi());
      d.dq.block(o.phi, o.phi, n_phi, n_phi) -= xt * xt.transpose();
      d.dq.block(o.sigma, o.phi, 1, n_phi) -= 2.0 * k_var * e_l * xt.transpose();
      d.dq(o.sigma, o.sigma) -= 1.0;
      const VectorXd xm = design_row(fits.outcome.design, vals);
      d.dq.block(o.nu, o.nu, n_nu, n_nu) -= xm * xm.transpose();
    } else {
      const VectorXd xt = design_row(fits.confounder.design, vals);
      const VectorXd xm_zero = design_row(fits.outcome.design, with_l(vals, 0.0));
      const VectorXd sm = design_row(fits.outcome.design, with_l(vals, 1.0)) - xm_zero;
      const double nu_l = sm.dot(fits.nu());
      MatrixXd dnu = MatrixXd::Zero(n_nu, n_nu);
      VectorXd g_sum = VectorXd::Zero(n_nu);
      VectorXd g_sigma = VectorXd::Zero(n_nu);
      for (int k = 0; k < draws.m(); ++k) {
        const double zk = draws.z(miss_row, k);
        const double l = xt.dot(fits.phi()) + sigma * zk;
        const VectorXd xk = xm_zero + l * sm;
        const double rk = rec.y - xk.dot(fits.nu());
        dnu -= xk * xk.transpose();
        const VectorXd g = -nu_l * xk + rk * sm;
        g_sum += g;
        g_sigma += g * zk / (2.0 * sigma);
      }
      d.dq.block(o.nu, o.nu, n_nu, n_nu) += dnu / m;
      d.dq.block(o.nu, o.phi, n_nu, n_phi) += g_sum / m * xt.transpose();
      d.dq.block(o.nu, o.sigma, n_nu, 1) += g_sigma / m;
      ++miss_row;
    }
    if (o.has_eta) {
      const VectorXd xr = design_row(fits.missingness->design, vals);
      d.dq.block(o.eta, o.eta, n_eta, n_eta) -= pi * (1.0 - pi) * xr * xr.transpose();
    }
    d.dz += dz.transpose();
  }
  const auto n = static_cast<double>(dataset.n());
  d.dz /= n;
  d.dq /= n;
  d.dz_dpsi = dz_dpsi / n;
  return d;
}

ScoreDerivatives fd_derivatives(const Dataset& dataset, const NuisanceFits& fits, double psi,
                                double step) {
  const VectorXd xi = pack_parameters(fits);
  const Index dim = xi.size();
  ScoreDerivatives d;
  d.dz.resize(dim);
  d.dq.resize(dim, dim);
  for (Index j = 0; j < dim; ++j) {
    const double h = step * std::max(1.0, std::abs(xi[j]));
    VectorXd up = xi, down = xi;
    up[j] += h;
    down[j] -= h;
    const ScoreStack sp = score_stack(dataset, unpack_parameters(fits, up), psi);
    const ScoreStack sm = score_stack(dataset, unpack_parameters(fits, down), psi);
    d.dz[j] = (sp.z.mean() - sm.z.mean()) / (2.0 * h);
    d.dq.col(j) = (sp.q.colwise().mean() - sm.q.colwise().mean()).transpose() / (2.0 * h);
  }
  const double h = step * std::max(1.0, std::abs(psi));
  const ScoreStack sp = score_stack(dataset, fits, psi + h);
  const ScoreStack sm = score_stack(dataset, fits, psi - h);
  d.dz_dpsi = (sp.z.mean() - sm.z.mean()) / (2.0 * h);
  return d;
}

double sandwich_from_scores(const Eigen::VectorXd& z, const Eigen::MatrixXd& q, double dz_dpsi,
                            const Eigen::RowVectorXd& dz, const Eigen::MatrixXd& dq,
                            const std::vector<ScoreBlock>& blocks) {
  const auto n = static_cast<double>(z.size());
  if (!(std::abs(dz_dpsi) > 0.0)) {
    throw Error(ErrorKind::singular_information, "derivative of the estimating function is zero");
  }
  VectorXd v = z;
  if (q.cols() > 0) {
    for (const auto& b : blocks) {
      Eigen::FullPivLU<MatrixXd> lu(dq.block(b.offset, b.offset, b.size, b.size));
      if (!lu.isInvertible()) {
        throw Error(ErrorKind::singular_information, "score derivative block '" + b.name +
                                                         "' is singular");
      }
    }
    Eigen::FullPivLU<MatrixXd> lu(dq);
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::singular_information, "score derivative matrix is singular");
    }
    // V = z - Q (dz dq^-1)^T, with (dz dq^-1)^T = dq^-T dz^T.
    const VectorXd w = Eigen::FullPivLU<MatrixXd>(dq.transpose()).solve(dz.transpose());
    v -= q * w;
  }
  CompensatedSum ss;
  for (Index i = 0; i < v.size(); ++i) ss.add(v[i] * v[i]);
  return ss.value() / n / (dz_dpsi * dz_dpsi) / n;
}

VarianceReport sandwich_variance(const Dataset& dataset, const NuisanceFits& fits, double psi_hat,
                                 DerivativeMethod method) {
  const ScoreStack s = score_stack(dataset, fits, psi_hat);
  const ScoreDerivatives d = method == DerivativeMethod::analytic
                                 ? analytic_derivatives(dataset, fits, psi_hat)
                                 : fd_derivatives(dataset, fits, psi_hat);
  VarianceReport report;
  report.sandwich_var = sandwich_from_scores(s.z, s.q, d.dz_dpsi, d.dz, d.dq, s.blocks);
  return report;
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t b) {
  Rng rng(derive_seed(seed, Stream::bootstrap, b));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Dataset resample(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  std::vector<ObservedRecord> records;
  records.reserve(indices.size());
  for (const auto i : indices) records.push_back(dataset[i]);
  return Dataset(std::move(records));
}

BootstrapDraws bootstrap_draws(const Dataset& dataset,
                               const std::function<double(const Dataset&)>& statistic,
                               std::size_t b_replicates, std::uint64_t seed, int threads) {
  if (b_replicates < 50) {
    throw Error(ErrorKind::config, "the bootstrap needs at least 50 replicates");
  }
  if (dataset.empty()) throw Error(ErrorKind::config, "cannot bootstrap an empty dataset");
  BootstrapDraws draws;
  draws.values.resize(b_replicates);
  parallel_for(b_replicates, threads, [&](std::size_t b) {
    try {
      draws.values[b] = statistic(resample(dataset, bootstrap_indices(dataset.n(), seed, b)));
      if (!std::isfinite(*draws.values[b])) draws.values[b].reset();
    } catch (const Error&) {
      draws.values[b].reset();
    }
  });
  draws.dropped = static_cast<std::size_t>(
      std::count_if(draws.values.begin(), draws.values.end(), [](const auto& v) { return !v; }));
  if (10 * draws.dropped > b_replicates) {
    throw Error(ErrorKind::degenerate_bootstrap,
                std::to_string(draws.dropped) + " of " + std::to_string(b_replicates) +
                    " bootstrap replicates failed");
  }
  return draws;
}

VarianceReport summarize_bootstrap(const BootstrapDraws& draws) {
  std::vector<double> kept;
  for (const auto& v : draws.values) {
    if (v) kept.push_back(*v);
  }
  VarianceReport report;
  report.replicates = kept.size();
  report.dropped = draws.dropped;
  report.bootstrap_var = sample_variance(kept);
  std::sort(kept.begin(), kept.end());
  report.bootstrap_ci = std::make_pair(quantile_sorted(kept, 0.025), quantile_sorted(kept, 0.975));
  return report;
}

VarianceReport bootstrap(const Dataset& dataset, EstimatorKind kind, const FitRecipe& recipe,
                         std::size_t b_replicates, std::uint64_t seed, int threads) {
  const auto statistic = [&](const Dataset& d) { return run_estimator(kind, d, recipe).psi_hat; };
  return summarize_bootstrap(bootstrap_draws(dataset, statistic, b_replicates, seed, threads));
}

}  // namespace attmiss
