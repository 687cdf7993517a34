#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "attmiss/cli.hpp"
#include "attmiss/data.hpp"
#include "attmiss/estimators.hpp"
#include "attmiss/simengine.hpp"

using namespace attmiss;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("attmiss_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// column -> value of the first data row of estimates.csv whose estimator matches
double estimate_column(const fs::path& csv, const std::string& estimator, const std::string& column) {
  std::ifstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> names;
  std::stringstream hs(header);
  for (std::string f; std::getline(hs, f, ',');) names.push_back(f);
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    if (fields.empty() || fields[0] != estimator) continue;
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == column) return std::stod(fields[k]);
  }
  return std::nan("");
}

}  // namespace

TEST_CASE("estimate rejects a CSV without the r column") {
  const auto dir = scratch("nor");
  std::ofstream(dir / "in.csv") << "y,a,c,l\n0.1,1,0.2,0.3\n";
  const auto r = cli({"estimate", "--input", (dir / "in.csv").string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("r") != std::string::npos);
}

TEST_CASE("the executable maps errors to exit codes") {
  const auto dir = scratch("exe");
  std::ofstream(dir / "in.csv") << "y,a,c,l\n0.1,1,0.2,0.3\n";
  const std::string cmd = std::string(ATTMISS_CLI_BIN) + " estimate --input " +
                          (dir / "in.csv").string() + " --out " + dir.string() + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
  CHECK(WEXITSTATUS(std::system((std::string(ATTMISS_CLI_BIN) + " --bogus > /dev/null 2>&1").c_str())) == 2);
}

TEST_CASE("estimate on complete data: DR equals the full-data benchmark") {
  const auto dir = scratch("complete");
  auto d = DgpParams::scenario1();
  d.eta = {50.0, 0.0, 0.0, 0.0};
  write_csv_file((dir / "in.csv").string(), generate_dataset(d, 1500, 3));
  const auto r = cli({"estimate", "--input", (dir / "in.csv").string(), "--out", dir.string(),
                      "--estimators", "DR,Full,AIPW,IPCW", "--seed", "5"});
  REQUIRE(r.code == 0);
  const auto csv = dir / "estimates.csv";
  CHECK(std::abs(estimate_column(csv, "DR", "psi_hat") - estimate_column(csv, "AIPW", "psi_hat")) <= 1e-10);
  CHECK(std::abs(estimate_column(csv, "IPCW", "psi_hat") - estimate_column(csv, "Full", "psi_hat")) <= 1e-10);
  CHECK(estimate_column(csv, "DR", "sandwich_se") > 0.0);
}

TEST_CASE("an exported replicate re-estimates to the simulated value") {
  const auto dir = scratch("export");
  const auto sim = cli({"simulate", "--scenario", "c", "--replicates", "3", "--n", "600",
                        "--m-imputations", "10", "--seed", "77", "--export-replicate", "1",
                        "--out", dir.string(), "--estimators", "DR,MCDLM,CC"});
  REQUIRE(sim.code == 0);
  const auto at = sim.out.find("--seed ");
  REQUIRE(at != std::string::npos);
  const std::string seed = sim.out.substr(at + 7, sim.out.find(' ', at + 7) - at - 7);
  const auto est = cli({"estimate", "--input", (dir / "replicate_c_1.csv").string(), "--out",
                        dir.string(), "--estimators", "DR,MCDLM,CC", "--seed", seed,
                        "--m-imputations", "10", "--misspec", "p_star"});
  REQUIRE(est.code == 0);
  // results.csv rows: scenario,replicate,estimator,psi_hat,...
  std::ifstream in(dir / "results.csv");
  std::string line;
  std::getline(in, line);
  int matched = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    if (f[1] != "1") continue;
    const double simulated = std::stod(f[3]);
    CHECK(std::abs(simulated - estimate_column(dir / "estimates.csv", f[2], "psi_hat")) <= 1e-10);
    ++matched;
  }
  CHECK(matched == 3);
}

TEST_CASE("simulate is byte-identical across reruns and thread counts") {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const std::vector<std::string> base{"simulate", "--scenario", "a,d", "--replicates", "4",
                                      "--n", "300", "--m-imputations", "5", "--seed", "3"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--out", a.string(), "--threads", "1"});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--out", b.string(), "--threads", "3"});
  REQUIRE(cli(args_a).code == 0);
  REQUIRE(cli(args_b).code == 0);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(fs::exists(a / "quantiles_d.csv"));

  const auto rep = cli({"report", "--summary", (a / "summary.csv").string(), "--svg",
                        (a / "box.svg").string()});
  CHECK(rep.code == 0);
  CHECK(slurp(a / "box.svg").rfind("<svg", 0) == 0);
}

TEST_CASE("config errors exit with 2") {
  const auto dir = scratch("config");
  CHECK(cli({"simulate", "--scenario", "a", "--replicates", "0", "--out", dir.string()}).code == 2);
  CHECK(cli({"simulate", "--out", dir.string()}).code == 2);
  std::ofstream(dir / "in.csv") << "y,a,c,l,r\n0.1,1,0.2,0.3,1\n";
  CHECK(cli({"estimate", "--input", (dir / "in.csv").string(), "--estimators", "", "--out",
             dir.string()}).code == 2);
  CHECK(cli({"estimate", "--input", (dir / "in.csv").string(), "--estimators", "TMLE", "--out",
             dir.string()}).code == 2);
  std::ofstream(dir / "bad.toml") << "scenario = \"a\"\nreplcates = 3\n";
  const auto r = cli({"simulate", "--config", (dir / "bad.toml").string(), "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("replcates") != std::string::npos);
  std::ofstream(dir / "empty.csv") << "scenario,estimator\n";
  CHECK(cli({"report", "--summary", (dir / "empty.csv").string()}).code == 2);
}

TEST_CASE("config files") {
  std::istringstream in(
      "scenario = \"b,g\"\nreplicates = 7\nn = 900\nestimators = [\"DR\", \"IPCW\"]\n"
      "master_seed = 11\nbootstrap_b = 60\nalpha = [-0.2, 0.35, 0.4, 0.5, 0.2]\n");
  const auto configs = load_scenario_configs(in);
  REQUIRE(configs.size() == 2);
  CHECK(configs[0].name == "b");
  CHECK(configs[1].dgp == DgpKind::scenario2);
  CHECK(configs[0].replicates == 7);
  CHECK(configs[1].n == 900);
  CHECK(configs[0].estimators.size() == 2);
  CHECK(configs[0].master_seed == 11);
  CHECK(*configs[1].bootstrap_b == 60);
  CHECK(configs[0].dgp_params().alpha[1] == 0.35);
}

TEST_CASE("positivity problems in the input exit with 4") {
  const auto dir = scratch("positivity");
  std::ofstream csv(dir / "in.csv");
  csv << "y,a,c,l,r\n";
  for (int i = 0; i < 40; ++i) csv << 0.1 * i << ",1," << 0.05 * i << "," << 0.2 * i << ",1\n";
  csv.close();
  const auto r = cli({"estimate", "--input", (dir / "in.csv").string(), "--out", dir.string()});
  CHECK(r.code == 4);
}
