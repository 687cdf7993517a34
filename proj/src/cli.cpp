#include "attmiss/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "attmiss/error.hpp"
#include "attmiss/estimators.hpp"
#include "attmiss/inference.hpp"
#include "attmiss/random.hpp"
#include "attmiss/report.hpp"

namespace attmiss {

namespace {

namespace fs = std::filesystem;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : ",") + p;
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_same_v<T, double>) {
      value = std::stod(text, &used);
    } else {
      if (!text.empty() && text.front() == '-') throw std::invalid_argument(text);
      value = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorKind::config, "key '" + key + "': not a valid number '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = lower(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorKind::config, "key '" + key + "': not a boolean '" + text + "'");
}

template <std::size_t N>
std::array<double, N> parse_array(const std::string& key, const std::vector<std::string>& in) {
  if (in.size() != N) {
    throw Error(ErrorKind::config, "key '" + key + "' needs " + std::to_string(N) + " values");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<double>(key, in[i]);
  return out;
}

// Fields a config file or flags may set; unset fields keep the grid defaults.
struct Overrides {
  std::optional<std::string> name;
  std::optional<DgpKind> dgp;
  std::optional<ToyDgp> toy;
  std::optional<std::size_t> n;
  std::optional<Misspec> misspec;
  std::optional<std::size_t> replicates;
  std::optional<std::uint64_t> master_seed;
  std::optional<std::vector<EstimatorKind>> estimators;
  std::optional<int> m_imputations;
  std::optional<std::size_t> bootstrap_b;
  std::optional<bool> sandwich;
  std::optional<int> threads;
  std::optional<std::array<double, 2>> zeta;
  std::optional<std::array<double, 4>> upsilon;
  std::optional<std::array<double, 5>> alpha;
  std::optional<std::array<double, 4>> eta;

  void apply(ScenarioConfig& c) const {
    if (name) c.name = *name;
    if (dgp) c.dgp = *dgp;
    if (toy) c.toy = toy;
    if (n) c.n = *n;
    if (misspec) c.misspec = *misspec;
    if (replicates) c.replicates = *replicates;
    if (master_seed) c.master_seed = *master_seed;
    if (estimators) c.estimators = *estimators;
    if (m_imputations) c.m_imputations = *m_imputations;
    if (bootstrap_b) c.bootstrap_b = bootstrap_b;
    if (sandwich) c.sandwich = *sandwich;
    if (threads) c.threads = *threads;
    if (zeta || upsilon || alpha || eta) {
      DgpParams p = c.dgp_params();
      if (zeta) p.zeta = *zeta;
      if (upsilon) p.upsilon = *upsilon;
      if (alpha) p.alpha = *alpha;
      if (eta) p.eta = *eta;
      c.params = p;
    }
  }
};

std::vector<char> parse_letters(const std::string& text) {
  if (lower(text) == "grid" || lower(text) == "all") {
    return {std::begin(kScenarioLetters), std::end(kScenarioLetters)};
  }
  std::vector<char> letters;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(),
                              [](unsigned char ch) { return std::isspace(ch); }),
               item.end());
    if (item.size() != 1 || item[0] < 'a' || item[0] > 'h') {
      throw Error(ErrorKind::config, "unknown scenario '" + item + "' (expected a-h or grid)");
    }
    letters.push_back(item[0]);
  }
  if (letters.empty()) throw Error(ErrorKind::config, "empty scenario list");
  return letters;
}

std::vector<ScenarioConfig> expand(const std::optional<std::string>& scenarios,
                                   const Overrides& overrides) {
  std::vector<ScenarioConfig> out;
  if (scenarios) {
    for (const char letter : parse_letters(*scenarios)) {
      ScenarioConfig c = grid_scenario(letter);
      Overrides o = overrides;
      o.name.reset();  // the letter names each grid entry
      o.apply(c);
      out.push_back(c);
    }
  } else {
    ScenarioConfig c;
    c.name = "custom";
    overrides.apply(c);
    out.push_back(c);
  }
  return out;
}

struct FileConfig {
  std::optional<std::string> scenarios;
  Overrides overrides;
};

FileConfig read_config(std::istream& in, const fs::path& base) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw Error(ErrorKind::parse, std::string("config: ") + e.what());
  }
  FileConfig fc;
  auto& o = fc.overrides;
  for (const auto& item : items) {
    const std::string key = lower(item.name);
    if (key == "++" || key == "--") continue;  // section markers
    const auto& v = item.inputs;
    const auto one = [&]() -> const std::string& {
      if (v.size() != 1) throw Error(ErrorKind::config, "key '" + key + "' takes one value");
      return v.front();
    };
    if (key == "scenario" || key == "scenarios") {
      fc.scenarios = join(v);
    } else if (key == "name") {
      o.name = one();
    } else if (key == "dgp") {
      o.dgp = parse_dgp(one());
    } else if (key == "toy_file") {
      fs::path p = one();
      if (p.is_relative()) p = base / p;
      o.toy = ToyDgp::from_file(p.string());
    } else if (key == "n") {
      o.n = parse_number<std::size_t>(key, one());
    } else if (key == "misspec") {
      o.misspec = parse_misspec(join(v));
    } else if (key == "replicates") {
      o.replicates = parse_number<std::size_t>(key, one());
    } else if (key == "master_seed" || key == "seed") {
      o.master_seed = parse_number<std::uint64_t>(key, one());
    } else if (key == "estimators") {
      o.estimators = parse_estimator_list(join(v));
    } else if (key == "m_imputations") {
      o.m_imputations = static_cast<int>(parse_number<std::size_t>(key, one()));
    } else if (key == "bootstrap_b") {
      o.bootstrap_b = parse_number<std::size_t>(key, one());
    } else if (key == "sandwich") {
      o.sandwich = parse_bool(key, one());
    } else if (key == "threads") {
      o.threads = static_cast<int>(parse_number<std::size_t>(key, one()));
    } else if (key == "zeta") {
      o.zeta = parse_array<2>(key, v);
    } else if (key == "upsilon") {
      o.upsilon = parse_array<4>(key, v);
    } else if (key == "alpha") {
      o.alpha = parse_array<5>(key, v);
    } else if (key == "eta") {
      o.eta = parse_array<4>(key, v);
    } else {
      throw Error(ErrorKind::config, "unknown key '" + item.name + "'");
    }
  }
  return fc;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::config, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorKind::config, "failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::config, "output directory '" + dir.string() + "' is not writable");
  }
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv(kSeedEnv)) {
    return parse_number<std::uint64_t>(kSeedEnv, env);
  }
  return kDefaultSeed;
}

struct EstimateArgs {
  std::string input;
  std::string estimators = "DR,Naive,CC,IPCW,MCDLM";
  std::optional<std::size_t> bootstrap_b;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string misspec;
  int m_imputations = 100;
  int threads = 1;
};

int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err) {
  const auto kinds = parse_estimator_list(args.estimators);
  if (kinds.empty()) throw Error(ErrorKind::empty_report, "no estimators requested");
  if (args.bootstrap_b && *args.bootstrap_b < 50) {
    throw Error(ErrorKind::config, "--bootstrap-b must be at least 50");
  }
  const Dataset data = read_csv_file(args.input);
  const auto problems = validate(data);
  if (!problems.empty()) {
    const auto& v = problems.front();
    const bool positivity = v.message.rfind("positivity", 0) == 0;
    throw Error(positivity ? ErrorKind::positivity : ErrorKind::parse, (v.record ? "record " + std::to_string(*v.record + 1) + ": "
                                            : std::string()) + v.message);
  }
  ensure_dir(args.out);

  FitRecipe recipe = misspecify(FitRecipe{}, parse_misspec(args.misspec));
  recipe.m_imputations = args.m_imputations;
  recipe.imputation_seed = args.seed.value_or(default_seed());

  std::optional<NuisanceFits> fits;
  std::optional<Error> fit_error;
  const bool needs_fits = std::any_of(kinds.begin(), kinds.end(), [](EstimatorKind k) {
    return k == EstimatorKind::dr || k == EstimatorKind::ipcw || k == EstimatorKind::mcdlm ||
           k == EstimatorKind::aipw;
  });
  if (needs_fits) {
    try {
      fits = fit_nuisances(data, recipe);
    } catch (const Error& e) {
      fit_error = e;
    }
  }

  std::vector<EstimateReport> reports;
  std::vector<std::optional<double>> sandwich_se, bootstrap_se;
  std::optional<ErrorKind> first_error;
  std::size_t ok = 0;
  for (const auto kind : kinds) {
    EstimateReport rep;
    std::optional<double> sse, bse;
    try {
      const bool uses_fits = kind != EstimatorKind::cc && kind != EstimatorKind::naive &&
                             kind != EstimatorKind::full;
      if (uses_fits && fit_error) throw *fit_error;
      rep = run_estimator(kind, data, recipe, fits ? &*fits : nullptr);
      if (kind == EstimatorKind::dr) {
        try {
          sse = std::sqrt(sandwich_variance(data, *fits, rep.psi_hat).sandwich_var);
        } catch (const Error& e) {
          err << "DR sandwich variance: " << e.what() << "\n";
        }
      }
      if (args.bootstrap_b) {
        const auto boot = bootstrap(data, kind, recipe, *args.bootstrap_b,
                                    derive_seed(recipe.imputation_seed, Stream::bootstrap, 0),
                                    args.threads);
        bse = std::sqrt(*boot.bootstrap_var);
      }
      ++ok;
    } catch (const Error& e) {
      rep = EstimateReport::make(kind, std::nan(""), std::nan(""), data.n());
      rep.diagnostics.insert(rep.diagnostics.begin(), e.what());
      if (!first_error) first_error = e.kind();
      err << to_string(kind) << ": " << e.what() << "\n";
    }
    reports.push_back(rep);
    sandwich_se.push_back(sse);
    bootstrap_se.push_back(bse);
  }

  std::ostringstream csv;
  write_estimates_csv(csv, reports, sandwich_se, bootstrap_se);
  write_file(fs::path(args.out) / "estimates.csv", csv.str());
  out << csv.str();
  if (ok == 0) return exit_code(first_error.value_or(ErrorKind::non_convergence));
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::optional<std::string> scenario;
  bool grid = false;
  std::string out = ".";
  std::optional<std::size_t> replicates, n, bootstrap_b, export_replicate;
  std::optional<std::uint64_t> seed;
  std::optional<int> m_imputations, threads;
  std::optional<std::string> estimators, misspec, dgp, toy;
  bool verbose = false;
};

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  FileConfig fc;
  if (!args.config.empty()) {
    std::ifstream in(args.config);
    if (!in) throw Error(ErrorKind::config, "cannot open '" + args.config + "'");
    fc = read_config(in, fs::path(args.config).parent_path());
  }
  if (args.grid) fc.scenarios = "grid";
  if (args.scenario) fc.scenarios = args.scenario;
  if (args.config.empty() && !fc.scenarios) {
    throw Error(ErrorKind::config, "simulate needs --config, --scenario or --grid");
  }
  auto& o = fc.overrides;
  if (args.replicates) o.replicates = args.replicates;
  if (args.n) o.n = args.n;
  if (args.bootstrap_b) o.bootstrap_b = args.bootstrap_b;
  if (args.seed) {
    o.master_seed = args.seed;
  } else if (!o.master_seed) {
    o.master_seed = default_seed();
  }
  if (args.m_imputations) o.m_imputations = args.m_imputations;
  if (args.threads) o.threads = args.threads;
  if (args.estimators) o.estimators = parse_estimator_list(*args.estimators);
  if (args.misspec) o.misspec = parse_misspec(*args.misspec);
  if (args.dgp) o.dgp = parse_dgp(*args.dgp);
  if (args.toy) o.toy = ToyDgp::from_file(*args.toy);

  const auto configs = expand(fc.scenarios, o);
  for (const auto& c : configs) {
    const auto problems = c.validate();
    if (!problems.empty()) {
      throw Error(ErrorKind::config, "scenario '" + c.name + "': " + problems.front());
    }
  }
  ensure_dir(args.out);
  const fs::path dir(args.out);

  std::vector<ResultRow> all_rows;
  std::vector<SummaryRow> all_summary;
  std::vector<BootstrapRow> all_boot;
  for (const auto& c : configs) {
    if (args.verbose) {
      err << "scenario " << c.name << ": dgp " << to_string(c.dgp) << ", misspec "
          << to_string(c.misspec) << ", " << c.replicates << " replicates of n = " << c.n << "\n";
    }
    MonteCarloResults res;
    try {
      res = run_monte_carlo(c);
    } catch (const Error& e) {
      throw Error(e.kind(), "scenario '" + c.name + "': " + e.what());
    }
    for (const auto& w : res.warnings) err << "warning: " << w << "\n";
    const auto summary = summarize(res.rows, c.truth());

    std::ostringstream q;
    write_quantiles_csv(q, box_stats(summary));
    write_file(dir / ("quantiles_" + c.name + ".csv"), q.str());

    if (args.export_replicate) {
      if (*args.export_replicate >= c.replicates) {
        throw Error(ErrorKind::config, "--export-replicate is out of range");
      }
      const auto data = replicate_data(c, *args.export_replicate);
      write_csv_file((dir / ("replicate_" + c.name + "_" + std::to_string(*args.export_replicate) +
                             ".csv")).string(),
                     data.observed);
      out << "replicate " << *args.export_replicate << " of scenario " << c.name
          << ": estimate with --seed " << replicate_seed(c.master_seed, *args.export_replicate)
          << " --m-imputations " << c.m_imputations << " --misspec " << to_string(c.misspec)
          << "\n";
    }
    all_rows.insert(all_rows.end(), res.rows.begin(), res.rows.end());
    all_summary.insert(all_summary.end(), summary.begin(), summary.end());
    all_boot.insert(all_boot.end(), res.bootstrap.begin(), res.bootstrap.end());
    out << render_text_table(summary, c.truth());
  }

  std::ostringstream results, summary, boot;
  write_results_csv(results, all_rows);
  write_summary_csv(summary, all_summary);
  write_file(dir / "results.csv", results.str());
  write_file(dir / "summary.csv", summary.str());
  if (!all_boot.empty()) {
    write_bootstrap_csv(boot, all_boot);
    write_file(dir / "bootstrap.csv", boot.str());
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> summaries;
  std::string svg;
  double truth = DgpParams::scenario1().att();
};

int cmd_report(const ReportArgs& args, std::ostream& out) {
  std::vector<SummaryRow> rows;
  for (const auto& path : args.summaries) {
    const auto part = read_summary_csv_file(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  out << render_text_table(rows, args.truth);
  if (!args.svg.empty()) write_file(args.svg, render_svg(box_stats(rows), args.truth));
  return 0;
}

}  // namespace

std::vector<ScenarioConfig> load_scenario_configs(std::istream& in) {
  const auto fc = read_config(in, fs::current_path());
  return expand(fc.scenarios, fc.overrides);
}

std::vector<ScenarioConfig> load_scenario_configs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open '" + path + "'");
  const auto fc = read_config(in, fs::path(path).parent_path());
  return expand(fc.scenarios, fc.overrides);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ATT estimation with a partially missing confounder", "attmiss"};
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* estimate = app.add_subcommand("estimate", "estimate the ATT on a y,a,c,l,r CSV");
  estimate->add_option("--input", ea.input, "input CSV")->required();
  estimate->add_option("--estimators", ea.estimators, "comma-separated estimator names");
  estimate->add_option("--bootstrap-b", ea.bootstrap_b, "bootstrap replicates (>= 50)");
  estimate->add_option("--seed", ea.seed, "seed for imputation and bootstrap draws")
      ->envname(kSeedEnv);
  estimate->add_option("--out", ea.out, "output directory");
  estimate->add_option("--misspec", ea.misspec, "f_star,p_star,pi_star subset");
  estimate->add_option("--m-imputations", ea.m_imputations, "imputations for MCDLM")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--threads", ea.threads, "bootstrap worker threads")
      ->check(CLI::PositiveNumber);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "run the Monte Carlo study");
  simulate->add_option("--config", sa.config, "scenario config file (TOML or INI)");
  simulate->add_option("--scenario", sa.scenario, "grid letters a-h, comma-separated");
  simulate->add_flag("--grid", sa.grid, "run scenarios a-h");
  simulate->add_option("--out", sa.out, "output directory");
  simulate->add_option("--replicates", sa.replicates, "Monte Carlo replicates");
  simulate->add_option("--n", sa.n, "sample size per replicate");
  simulate->add_option("--seed", sa.seed, "master seed")->envname(kSeedEnv);
  simulate->add_option("--m-imputations", sa.m_imputations, "imputations for MCDLM");
  simulate->add_option("--bootstrap-b", sa.bootstrap_b, "bootstrap replicates for DR");
  simulate->add_option("--threads", sa.threads, "worker threads");
  simulate->add_option("--estimators", sa.estimators, "comma-separated estimator names");
  simulate->add_option("--misspec", sa.misspec, "f_star,p_star,pi_star subset");
  simulate->add_option("--dgp", sa.dgp, "scenario1, scenario2 or toy");
  simulate->add_option("--toy", sa.toy, "toy DGP atom table (JSON)");
  simulate->add_option("--export-replicate", sa.export_replicate,
                       "write this replicate's dataset as CSV");
  simulate->add_flag("-v,--verbose", sa.verbose, "progress on stderr");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "render summary tables and boxplots");
  report->add_option("--summary", ra.summaries, "summary CSV files")->required();
  report->add_option("--svg", ra.svg, "write an SVG boxplot panel here");
  report->add_option("--truth", ra.truth, "target ATT");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(ea, out, err);
    if (simulate->parsed()) return cmd_simulate(sa, out, err);
    return cmd_report(ra, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code(e.kind());
  }
}

}  // namespace attmiss
