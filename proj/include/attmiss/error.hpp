#pragma once

#include <stdexcept>
#include <string>

namespace attmiss {

enum class ErrorKind {
  config,
  parse,
  degenerate_response,
  non_convergence,
  singular_design,
  positivity,
  undefined_odds_ratio,
  divergent_normalizer,
  numeric_overflow,
  non_finite,
  empty_arm,
  no_complete_cases,
  oracle_data_required,
  singular_information,
  degenerate_bootstrap,
  insufficient_replicates,
  empty_report,
};

const char* to_string(ErrorKind kind);

// Every failure the library reports is an Error carrying a kind, so callers
// (the CLI, the Monte Carlo loop) can map it to an exit code or a counted
// per-replicate failure without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for a failure of the given kind.
int exit_code(ErrorKind kind);

}  // namespace attmiss
