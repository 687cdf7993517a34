#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "attmiss/simengine.hpp"

namespace attmiss {

inline constexpr std::uint64_t kDefaultSeed = 20240601;
inline constexpr const char* kSeedEnv = "ATTMISS_SEED";

// Scenario configs described by a key = value file (TOML or INI style)
// whose keys mirror ScenarioConfig: scenario, name, dgp, toy_file, n,
// misspec, replicates, master_seed, estimators, m_imputations, bootstrap_b,
// sandwich, threads, zeta, upsilon, alpha, eta. `scenario` takes a grid
// letter, a comma list of letters or "grid"; the other keys then override
// each grid entry.
std::vector<ScenarioConfig> load_scenario_configs(std::istream& in);
std::vector<ScenarioConfig> load_scenario_configs_file(const std::string& path);

// Entry point shared by the executable and the tests; args excludes argv[0].
// Returns the process exit code: 0 ok, 2 config or parse error, 3 estimation
// failure, 4 positivity violation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attmiss
