#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "attmiss/estimators.hpp"
#include "attmiss/simengine.hpp"

namespace attmiss {

// Tidy CSV writers. Numbers use %.17g so identical runs give identical bytes.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
void write_bootstrap_csv(std::ostream& out, const std::vector<BootstrapRow>& rows);
void write_estimates_csv(std::ostream& out, const std::vector<EstimateReport>& reports,
                         const std::vector<std::optional<double>>& sandwich_se,
                         const std::vector<std::optional<double>>& bootstrap_se);

struct BoxStats {
  std::string scenario;
  std::string estimator;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

std::vector<BoxStats> box_stats(const std::vector<SummaryRow>& rows);
void write_quantiles_csv(std::ostream& out, const std::vector<BoxStats>& boxes);

// Reads what write_summary_csv wrote. Throws Error(parse) with a line number
// on malformed input and Error(empty_report) when there are no rows.
std::vector<SummaryRow> read_summary_csv(std::istream& in);
std::vector<SummaryRow> read_summary_csv_file(const std::string& path);

std::string render_text_table(const std::vector<SummaryRow>& rows, double truth);

// One panel per scenario, one box per estimator in the order DR, Naive, CC,
// IPCW, MCDLM, Full, AIPW. Throws Error(empty_report) on empty input.
std::string render_svg(const std::vector<BoxStats>& boxes, double truth);

}  // namespace attmiss
