#include "attmiss/error.hpp"

namespace attmiss {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::degenerate_response: return "degenerate response";
    case ErrorKind::non_convergence: return "non-convergence";
    case ErrorKind::singular_design: return "singular design";
    case ErrorKind::positivity: return "positivity violation";
    case ErrorKind::undefined_odds_ratio: return "undefined odds ratio";
    case ErrorKind::divergent_normalizer: return "divergent normalizer";
    case ErrorKind::numeric_overflow: return "numeric overflow";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::empty_arm: return "empty treatment arm";
    case ErrorKind::no_complete_cases: return "no complete cases";
    case ErrorKind::oracle_data_required: return "oracle data required";
    case ErrorKind::singular_information: return "singular information";
    case ErrorKind::degenerate_bootstrap: return "degenerate bootstrap";
    case ErrorKind::insufficient_replicates: return "insufficient replicates";
    case ErrorKind::empty_report: return "empty report";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::parse:
    case ErrorKind::empty_report:
      return 2;
    case ErrorKind::positivity:
      return 4;
    default:
      return 3;
  }
}

}  // namespace attmiss
