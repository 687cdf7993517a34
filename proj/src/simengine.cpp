#include "attmiss/simengine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "attmiss/error.hpp"
#include "attmiss/inference.hpp"
#include "attmiss/numeric.hpp"
#include "attmiss/parallel.hpp"
#include "attmiss/quadrature.hpp"
#include "attmiss/random.hpp"

namespace attmiss {

Eigen::Vector4d DgpParams::phi() const {
  const double phi2 = sigma_yl() / sigma_y_sq();
  return {alpha[0] - phi2 * upsilon[0], alpha[1] - phi2 * upsilon[1], phi2,
          alpha[2] - phi2 * upsilon[2]};
}

Eigen::Vector4d DgpParams::nu() const {
  const double nu2 = sigma_yl() / sigma_l_sq();
  return {upsilon[0] - nu2 * alpha[0], upsilon[1] - nu2 * alpha[1], nu2,
          upsilon[2] - nu2 * alpha[2]};
}

Eigen::Vector3d DgpParams::lambda() const {
  // L | A, C is normal with a shift alpha1 A, so Bayes' rule adds
  // (alpha1 / sigma_l_sq) (L - alpha0 - alpha2 C - alpha1 / 2) to the logit.
  const double lambda1 = alpha[1] / sigma_l_sq();
  return {zeta[0] - lambda1 * (alpha[0] + 0.5 * alpha[1]), lambda1, zeta[1] - lambda1 * alpha[2]};
}

double DgpParams::t_variance() const {
  return sigma_l_sq() - sigma_yl() * sigma_yl() / sigma_y_sq();
}

double DgpParams::m_variance() const {
  return sigma_y_sq() - sigma_yl() * sigma_yl() / sigma_l_sq();
}

std::vector<std::string> DgpParams::validate() const {
  std::vector<std::string> problems;
  if (!(sigma_y_sq() > 0.0)) problems.emplace_back("sigma_y_sq must be positive");
  if (!(sigma_l_sq() > 0.0)) problems.emplace_back("sigma_l_sq must be positive");
  if (!(sigma_yl() * sigma_yl() < sigma_y_sq() * sigma_l_sq())) {
    problems.emplace_back("sigma_yl^2 must be below sigma_y_sq * sigma_l_sq");
  }
  return problems;
}

DgpParams DgpParams::scenario1() {
  DgpParams p;
  p.zeta = {-0.44, 0.40};
  p.upsilon = {0.2, 0.38, 0.3, 0.51};
  p.alpha = {-0.15, 0.215, 0.14, 0.43, 0.21};
  p.eta = {1.0, -1.75, -1.75, 1.25};
  return p;
}

DgpParams DgpParams::scenario2() {
  DgpParams p = scenario1();
  p.zeta[1] = 0.38;
  p.alpha[2] = 0.914;
  return p;
}

SimulatedData simulate(const DgpParams& params, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sy = std::sqrt(params.sigma_y_sq());
  const double l_on_z1 = params.sigma_yl() / sy;
  const double l_on_z2 = std::sqrt(params.t_variance());
  const auto& u = params.upsilon;
  const auto& al = params.alpha;
  const auto& e = params.eta;

  std::vector<ObservedRecord> observed, full;
  observed.reserve(n);
  full.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = normal(rng) + sym(rng);
    const int a = unit(rng) < expit(params.zeta[0] + params.zeta[1] * c) ? 1 : 0;
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double y = u[0] + u[1] * a + u[2] * c + sy * z1;
    const double l = al[0] + al[1] * a + al[2] * c + l_on_z1 * z1 + l_on_z2 * z2;
    const bool r = unit(rng) < expit(e[0] + e[1] * a + e[2] * c + e[3] * y);
    full.push_back(ObservedRecord::complete(y, a, c, l));
    observed.push_back(r ? ObservedRecord::complete(y, a, c, l) : ObservedRecord::missing(y, a, c));
  }
  return {Dataset(std::move(observed)), Dataset(std::move(full))};
}

Dataset generate_dataset(const DgpParams& params, std::size_t n, std::uint64_t seed) {
  return simulate(params, n, seed).observed;
}

double true_psi(const DgpParams& params) {
  // C = Z + U; integrate Z by Gauss-Hermite and U by composite Simpson.
  const auto gh = gauss_hermite(60);
  constexpr int kIntervals = 2000;
  CompensatedSum num, den;
  for (int k = 0; k <= kIntervals; ++k) {
    const double uval = -1.0 + 2.0 * k / kIntervals;
    const double simpson = (k == 0 || k == kIntervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    const double wu = simpson * (2.0 / kIntervals) / 3.0 * 0.5;
    for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
      const double c = gh.nodes[j] + uval;
      const double pa = expit(params.zeta[0] + params.zeta[1] * c);
      num.add(wu * gh.weights[j] * c * pa);
      den.add(wu * gh.weights[j] * pa);
    }
  }
  return params.upsilon[0] + params.nu()[2] * params.alpha[1] +
         params.upsilon[2] * num.value() / den.value();
}

double ToyDgp::pr_a1() const {
  double s = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int l = 0; l < 2; ++l)
      for (int y = 0; y < 2; ++y) s += p(c, 1, l, y);
  return s;
}

double ToyDgp::m(int a, int l, int c) const {
  return p(c, a, l, 1) / (p(c, a, l, 0) + p(c, a, l, 1));
}

double ToyDgp::propensity(int l, int c) const {
  const double treated = p(c, 1, l, 0) + p(c, 1, l, 1);
  return treated / (treated + p(c, 0, l, 0) + p(c, 0, l, 1));
}

double ToyDgp::t1(int a, int y, int c) const {
  return p(c, a, 1, y) / (p(c, a, 0, y) + p(c, a, 1, y));
}

double ToyDgp::psi() const {
  double s = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int l = 0; l < 2; ++l) s += m(0, l, c) * (p(c, 1, l, 0) + p(c, 1, l, 1));
  return s / pr_a1();
}

ToyDgp ToyDgp::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("toy DGP: ") + e.what());
  }
  ToyDgp toy;
  std::array<bool, 16> seen_atom{};
  std::array<bool, 8> seen_pi{};
  const auto bit = [](const nlohmann::json& v) {
    const int b = v.get<int>();
    if (b != 0 && b != 1) throw Error(ErrorKind::parse, "toy DGP: indices must be 0 or 1");
    return b;
  };
  try {
    for (const auto& row : doc.at("atoms")) {
      const int c = bit(row.at(0)), a = bit(row.at(1)), l = bit(row.at(2)), y = bit(row.at(3));
      const auto k = static_cast<std::size_t>(8 * c + 4 * a + 2 * l + y);
      toy.atoms[k] = row.at(4).get<double>();
      seen_atom[k] = true;
    }
    for (const auto& row : doc.at("pi")) {
      const int a = bit(row.at(0)), y = bit(row.at(1)), c = bit(row.at(2));
      const auto k = static_cast<std::size_t>(4 * a + 2 * y + c);
      toy.pi[k] = row.at(3).get<double>();
      seen_pi[k] = true;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("toy DGP: ") + e.what());
  }
  if (!std::all_of(seen_atom.begin(), seen_atom.end(), [](bool b) { return b; }) ||
      !std::all_of(seen_pi.begin(), seen_pi.end(), [](bool b) { return b; })) {
    throw Error(ErrorKind::parse, "toy DGP: every atom and every pi cell must be listed");
  }
  const auto problems = toy.validate();
  if (!problems.empty()) throw Error(ErrorKind::config, "toy DGP: " + problems.front());
  return toy;
}

ToyDgp ToyDgp::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

std::vector<std::string> ToyDgp::validate() const {
  std::vector<std::string> problems;
  double total = 0.0;
  for (const double a : atoms) {
    if (!(a > 0.0)) problems.emplace_back("atom probabilities must be positive");
    total += a;
  }
  if (std::abs(total - 1.0) > 1e-12) problems.emplace_back("atom probabilities must sum to 1");
  for (const double v : pi) {
    if (!(v > 0.0 && v <= 1.0)) problems.emplace_back("pi must lie in (0, 1]");
  }
  return problems;
}

Dataset generate_toy_dataset(const ToyDgp& toy, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::discrete_distribution<int> atom(toy.atoms.begin(), toy.atoms.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ObservedRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = atom(rng);
    const int c = k / 8, a = (k / 4) % 2, l = (k / 2) % 2, y = k % 2;
    const bool r = unit(rng) < toy.pi_of(a, y, c);
    records.push_back(r ? ObservedRecord::complete(y, a, c, l) : ObservedRecord::missing(y, a, c));
  }
  return Dataset(std::move(records));
}

Misspec parse_misspec(const std::string& text) {
  Misspec m;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(),
                              [](unsigned char ch) { return std::isspace(ch); }),
               item.end());
    std::transform(item.begin(), item.end(), item.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (item.empty() || item == "none") continue;
    if (item == "f_star" || item == "f*") {
      m.f_star = true;
    } else if (item == "p_star" || item == "p*") {
      m.p_star = true;
    } else if (item == "pi_star" || item == "pi*") {
      m.pi_star = true;
    } else {
      throw Error(ErrorKind::config, "unknown misspecification switch '" + item + "'");
    }
  }
  return m;
}

std::string to_string(const Misspec& m) {
  std::string s;
  const auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ",";
    s += name;
  };
  add(m.f_star, "f_star");
  add(m.p_star, "p_star");
  add(m.pi_star, "pi_star");
  return s.empty() ? "none" : s;
}

FitRecipe misspecify(FitRecipe recipe, const Misspec& m) {
  if (m.p_star) recipe.propensity = main_effects(Column::a, {Column::l});
  if (m.f_star) {
    recipe.confounder = main_effects(Column::l, {Column::a, Column::y});
    recipe.outcome = main_effects(Column::y, {Column::a, Column::l});
  }
  if (m.pi_star) recipe.missingness = main_effects(Column::r, {Column::c});
  return recipe;
}

DgpKind parse_dgp(const std::string& text) {
  if (text == "scenario1" || text == "1") return DgpKind::scenario1;
  if (text == "scenario2" || text == "2") return DgpKind::scenario2;
  if (text == "toy" || text == "discrete-toy") return DgpKind::toy;
  throw Error(ErrorKind::config, "unknown dgp '" + text + "'");
}

const char* to_string(DgpKind kind) {
  switch (kind) {
    case DgpKind::scenario1: return "scenario1";
    case DgpKind::scenario2: return "scenario2";
    case DgpKind::toy: return "toy";
  }
  return "?";
}

std::vector<std::string> ScenarioConfig::validate() const {
  std::vector<std::string> problems;
  if (n < 100) problems.emplace_back("n must be at least 100");
  if (replicates < 1) problems.emplace_back("replicates must be at least 1");
  if (m_imputations < 1) problems.emplace_back("m_imputations must be at least 1");
  if (estimators.empty()) problems.emplace_back("no estimators requested");
  if (bootstrap_b && *bootstrap_b < 50) problems.emplace_back("bootstrap_b must be at least 50");
  if (threads < 1) problems.emplace_back("threads must be at least 1");
  if (dgp == DgpKind::toy && !toy) problems.emplace_back("the toy dgp needs its atom table");
  if (dgp != DgpKind::toy) {
    for (auto& p : dgp_params().validate()) problems.push_back(p);
  }
  return problems;
}

DgpParams ScenarioConfig::dgp_params() const {
  if (params) return *params;
  return dgp == DgpKind::scenario2 ? DgpParams::scenario2() : DgpParams::scenario1();
}

double ScenarioConfig::truth() const {
  if (dgp == DgpKind::toy) {
    const auto& t = *toy;
    double s = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int l = 0; l < 2; ++l)
        for (int y = 0; y < 2; ++y) s += y * t.p(c, 1, l, y);
    return s / t.pr_a1() - t.psi();
  }
  return dgp_params().att();
}

ScenarioConfig grid_scenario(char letter) {
  ScenarioConfig cfg;
  cfg.name = std::string(1, letter);
  switch (letter) {
    case 'a': break;
    case 'b': cfg.misspec.f_star = true; break;
    case 'c': cfg.misspec.p_star = true; break;
    case 'd': cfg.misspec.pi_star = true; break;
    case 'e': cfg.misspec.pi_star = cfg.misspec.p_star = true; break;
    case 'f': cfg.misspec.f_star = cfg.misspec.p_star = true; break;
    case 'g':
      cfg.misspec.f_star = cfg.misspec.pi_star = true;
      cfg.dgp = DgpKind::scenario2;
      break;
    case 'h':
      cfg.misspec.f_star = cfg.misspec.p_star = cfg.misspec.pi_star = true;
      cfg.dgp = DgpKind::scenario2;
      break;
    default: throw Error(ErrorKind::config, std::string("unknown scenario '") + letter + "'");
  }
  return cfg;
}

std::uint64_t replicate_seed(std::uint64_t master, std::size_t replicate) {
  return derive_seed(master, Stream::data, replicate);
}

SimulatedData replicate_data(const ScenarioConfig& config, std::size_t replicate) {
  const std::uint64_t seed = derive_seed(replicate_seed(config.master_seed, replicate),
                                         Stream::data, 0);
  if (config.dgp == DgpKind::toy) {
    Dataset observed = generate_toy_dataset(*config.toy, config.n, seed);
    return {observed, Dataset()};
  }
  return simulate(config.dgp_params(), config.n, seed);
}

namespace {

struct ReplicateOutput {
  std::vector<ResultRow> rows;
  std::vector<BootstrapRow> bootstrap;
};

ReplicateOutput run_replicate(const ScenarioConfig& config, std::size_t r) {
  const SimulatedData data = replicate_data(config, r);
  FitRecipe recipe = misspecify(FitRecipe{}, config.misspec);
  recipe.m_imputations = config.m_imputations;
  recipe.imputation_seed = replicate_seed(config.master_seed, r);

  std::optional<NuisanceFits> fits;
  std::optional<Error> fit_error;
  const auto needs_fits = [](EstimatorKind k) {
    return k == EstimatorKind::dr || k == EstimatorKind::ipcw || k == EstimatorKind::mcdlm;
  };
  if (std::any_of(config.estimators.begin(), config.estimators.end(), needs_fits)) {
    try {
      fits = fit_nuisances(data.observed, recipe);
    } catch (const Error& e) {
      fit_error = e;
    }
  }

  ReplicateOutput out;
  for (const auto kind : config.estimators) {
    ResultRow row;
    row.scenario = config.name;
    row.replicate = r;
    row.estimator = kind;
    try {
      if (needs_fits(kind) && fit_error) throw *fit_error;
      EstimateReport rep;
      if (kind == EstimatorKind::full || kind == EstimatorKind::aipw) {
        if (data.full.empty()) {
          throw Error(ErrorKind::oracle_data_required, "no full data for this dgp");
        }
        rep = run_estimator(kind, data.full, recipe);
      } else {
        rep = run_estimator(kind, data.observed, recipe, fits ? &*fits : nullptr);
      }
      row.psi_hat = rep.psi_hat;
      row.theta_hat = rep.theta_hat;
      row.att_hat = rep.att_hat;
      row.converged = true;
      if (kind == EstimatorKind::dr && config.sandwich) {
        try {
          row.se = std::sqrt(sandwich_variance(data.observed, *fits, rep.psi_hat).sandwich_var);
        } catch (const Error& e) {
          row.error = e.what();
        }
      }
      if (kind == EstimatorKind::dr && config.bootstrap_b) {
        const auto boot = bootstrap(data.observed, kind, recipe, *config.bootstrap_b,
                                    derive_seed(recipe.imputation_seed, Stream::bootstrap, 0));
        out.bootstrap.push_back({config.name, r, kind, std::sqrt(*boot.bootstrap_var),
                                 boot.bootstrap_ci->first, boot.bootstrap_ci->second,
                                 boot.dropped});
      }
    } catch (const Error& e) {
      row.converged = false;
      row.psi_hat = row.theta_hat = row.att_hat = std::nan("");
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace

MonteCarloResults run_monte_carlo(const ScenarioConfig& config) {
  const auto problems = config.validate();
  if (!problems.empty()) {
    throw Error(ErrorKind::config, "scenario '" + config.name + "': " + problems.front());
  }
  std::vector<ReplicateOutput> outputs(config.replicates);
  parallel_for(config.replicates, config.threads,
               [&](std::size_t r) { outputs[r] = run_replicate(config, r); });

  MonteCarloResults results;
  std::map<EstimatorKind, std::size_t> failures;
  for (auto& o : outputs) {
    for (auto& row : o.rows) {
      if (!row.converged) ++failures[row.estimator];
      results.rows.push_back(std::move(row));
    }
    for (auto& b : o.bootstrap) results.bootstrap.push_back(std::move(b));
  }
  for (const auto& [kind, count] : failures) {
    if (20 * count > config.replicates) {
      results.warnings.push_back("scenario " + config.name + ": " + to_string(kind) + " failed in " +
                                 std::to_string(count) + " of " +
                                 std::to_string(config.replicates) + " replicates");
    }
  }
  return results;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows, double truth) {
  std::vector<std::pair<std::string, EstimatorKind>> order;
  std::map<std::pair<std::string, EstimatorKind>, std::vector<const ResultRow*>> groups;
  for (const auto& row : rows) {
    const auto key = std::make_pair(row.scenario, row.estimator);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&row);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    SummaryRow s;
    s.scenario = key.first;
    s.estimator = key.second;
    std::vector<double> att, psi, se;
    for (const auto* row : groups[key]) {
      if (!row->converged) {
        ++s.failures;
        continue;
      }
      att.push_back(row->att_hat);
      psi.push_back(row->psi_hat);
      if (row->se) se.push_back(*row->se);
    }
    s.n_ok = att.size();
    s.available = s.n_ok >= 2;
    if (s.available) {
      s.mean_bias = compensated_mean(att) - truth;
      s.mc_sd = std::sqrt(sample_variance(att));
      s.mc_se = s.mc_sd / std::sqrt(static_cast<double>(s.n_ok));
      s.mean_psi = compensated_mean(psi);
      s.sd_psi = std::sqrt(sample_variance(psi));
      std::sort(att.begin(), att.end());
      s.min = att.front();
      s.max = att.back();
      s.q1 = quantile_sorted(att, 0.25);
      s.median = quantile_sorted(att, 0.5);
      s.q3 = quantile_sorted(att, 0.75);
      s.iqr = s.q3 - s.q1;
      if (!se.empty()) {
        std::sort(se.begin(), se.end());
        s.median_se = quantile_sorted(se, 0.5);
      }
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace attmiss
