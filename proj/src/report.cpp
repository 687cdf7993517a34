#include "attmiss/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "attmiss/error.hpp"

namespace attmiss {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// Fields may not contain commas; error strings are sanitized on the way out.
std::string clean(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int estimator_rank(const std::string& name) {
  int rank = 0;
  for (const auto kind : kAllEstimators) {
    if (name == to_string(kind)) return rank;
    ++rank;
  }
  return rank;
}

const char* const kSummaryHeader =
    "scenario,estimator,n_ok,failures,available,mean_bias,mc_sd,mc_se,median,q1,q3,iqr,min,max,"
    "mean_psi,sd_psi,median_se";

}  // namespace

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "scenario,replicate,estimator,psi_hat,theta_hat,att_hat,se,converged,error\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.replicate << ',' << to_string(r.estimator) << ','
        << num(r.psi_hat) << ',' << num(r.theta_hat) << ',' << num(r.att_hat) << ','
        << opt(r.se) << ',' << (r.converged ? 1 : 0) << ',' << clean(r.error) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.scenario << ',' << to_string(s.estimator) << ',' << s.n_ok << ',' << s.failures
        << ',' << (s.available ? 1 : 0) << ',' << num(s.mean_bias) << ',' << num(s.mc_sd) << ','
        << num(s.mc_se) << ',' << num(s.median) << ',' << num(s.q1) << ',' << num(s.q3) << ','
        << num(s.iqr) << ',' << num(s.min) << ',' << num(s.max) << ',' << num(s.mean_psi) << ','
        << num(s.sd_psi) << ',' << opt(s.median_se) << '\n';
  }
}

void write_bootstrap_csv(std::ostream& out, const std::vector<BootstrapRow>& rows) {
  out << "scenario,replicate,estimator,se,ci_lo,ci_hi,dropped\n";
  for (const auto& b : rows) {
    out << b.scenario << ',' << b.replicate << ',' << to_string(b.estimator) << ',' << num(b.se)
        << ',' << num(b.ci_lo) << ',' << num(b.ci_hi) << ',' << b.dropped << '\n';
  }
}

void write_estimates_csv(std::ostream& out, const std::vector<EstimateReport>& reports,
                         const std::vector<std::optional<double>>& sandwich_se,
                         const std::vector<std::optional<double>>& bootstrap_se) {
  out << "estimator,psi_hat,theta_hat,att_hat,n_used,sandwich_se,bootstrap_se,error\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const std::string error = r.diagnostics.empty() ? "" : clean(r.diagnostics.front());
    out << to_string(r.estimator) << ',' << num(r.psi_hat) << ',' << num(r.theta_hat) << ','
        << num(r.att_hat) << ',' << r.n_used << ',' << opt(sandwich_se[i]) << ','
        << opt(bootstrap_se[i]) << ',' << error << '\n';
  }
}

std::vector<BoxStats> box_stats(const std::vector<SummaryRow>& rows) {
  std::vector<BoxStats> out;
  for (const auto& s : rows) {
    if (!s.available) continue;
    out.push_back({s.scenario, to_string(s.estimator), s.min, s.q1, s.median, s.q3, s.max});
  }
  return out;
}

void write_quantiles_csv(std::ostream& out, const std::vector<BoxStats>& boxes) {
  out << "scenario,estimator,min,q1,median,q3,max\n";
  for (const auto& b : boxes) {
    out << b.scenario << ',' << b.estimator << ',' << num(b.min) << ',' << num(b.q1) << ','
        << num(b.median) << ',' << num(b.q3) << ',' << num(b.max) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorKind::empty_report, "summary has no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const auto expected = split(kSummaryHeader);
  for (const auto& name : expected) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      throw Error(ErrorKind::parse, "line 1: missing column '" + name + "'");
    }
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (f.size() != header.size()) {
      throw Error(ErrorKind::parse, where + "expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(f.size()));
    }
    const auto real = [&](const char* name) {
      const std::string& s = f[col.at(name)];
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw Error(ErrorKind::parse, where + "column '" + name + "' is not a number: '" + s + "'");
      }
    };
    SummaryRow s;
    s.scenario = f[col.at("scenario")];
    try {
      s.estimator = parse_estimator(f[col.at("estimator")]);
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, where + e.what());
    }
    s.n_ok = static_cast<std::size_t>(real("n_ok"));
    s.failures = static_cast<std::size_t>(real("failures"));
    s.available = real("available") != 0.0;
    s.mean_bias = real("mean_bias");
    s.mc_sd = real("mc_sd");
    s.mc_se = real("mc_se");
    s.median = real("median");
    s.q1 = real("q1");
    s.q3 = real("q3");
    s.iqr = real("iqr");
    s.min = real("min");
    s.max = real("max");
    s.mean_psi = real("mean_psi");
    s.sd_psi = real("sd_psi");
    if (!f[col.at("median_se")].empty()) s.median_se = real("median_se");
    rows.push_back(s);
  }
  if (rows.empty()) throw Error(ErrorKind::empty_report, "summary has no estimator rows");
  return rows;
}

std::vector<SummaryRow> read_summary_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open '" + path + "'");
  return read_summary_csv(in);
}

std::string render_text_table(const std::vector<SummaryRow>& rows, double truth) {
  if (rows.empty()) throw Error(ErrorKind::empty_report, "nothing to report");
  std::ostringstream out;
  out << "truth ATT = " << fixed(truth, 4) << "\n";
  std::string current;
  for (const auto& s : rows) {
    if (s.scenario != current) {
      current = s.scenario;
      out << "\nscenario " << current << "\n";
      out << std::left << std::setw(10) << "estimator" << std::right << std::setw(6) << "ok"
          << std::setw(6) << "fail" << std::setw(11) << "bias" << std::setw(10) << "mc_se"
          << std::setw(10) << "mc_sd" << std::setw(10) << "median" << std::setw(10) << "iqr"
          << std::setw(10) << "med_se" << "  flag\n";
    }
    out << std::left << std::setw(10) << to_string(s.estimator) << std::right << std::setw(6)
        << s.n_ok << std::setw(6) << s.failures;
    if (!s.available) {
      out << "  summary unavailable\n";
      continue;
    }
    out << std::setw(11) << fixed(s.mean_bias, 5) << std::setw(10) << fixed(s.mc_se, 5)
        << std::setw(10) << fixed(s.mc_sd, 5) << std::setw(10) << fixed(s.median, 4)
        << std::setw(10) << fixed(s.iqr, 4) << std::setw(10)
        << (s.median_se ? fixed(*s.median_se, 5) : std::string("-"))
        << (s.unbiased() ? "  " : "  biased") << "\n";
  }
  return out.str();
}

std::string render_svg(const std::vector<BoxStats>& input, double truth) {
  if (input.empty()) throw Error(ErrorKind::empty_report, "no boxes to draw");

  std::vector<std::string> scenarios;
  for (const auto& b : input) {
    if (std::find(scenarios.begin(), scenarios.end(), b.scenario) == scenarios.end()) {
      scenarios.push_back(b.scenario);
    }
  }
  double lo = truth, hi = truth;
  for (const auto& b : input) {
    lo = std::min(lo, b.min);
    hi = std::max(hi, b.max);
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }

  constexpr double kPanelW = 240, kPanelH = 300, kTop = 30, kLeft = 50, kGap = 20;
  constexpr double kPlotH = kPanelH - kTop - 40;
  const double width = kLeft + scenarios.size() * (kPanelW + kGap);
  const double height = kPanelH;
  const auto ypos = [&](double v) { return kTop + (hi - v) / (hi - lo) * kPlotH; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
      << fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"4\" y=\"" << fixed(ypos(hi), 2) << "\">" << fixed(hi, 3) << "</text>\n";
  svg << "<text x=\"4\" y=\"" << fixed(ypos(lo), 2) << "\">" << fixed(lo, 3) << "</text>\n";

  for (std::size_t p = 0; p < scenarios.size(); ++p) {
    std::vector<BoxStats> boxes;
    for (const auto& b : input) {
      if (b.scenario == scenarios[p]) boxes.push_back(b);
    }
    std::stable_sort(boxes.begin(), boxes.end(), [](const BoxStats& x, const BoxStats& y) {
      return estimator_rank(x.estimator) < estimator_rank(y.estimator);
    });
    const double x0 = kLeft + p * (kPanelW + kGap);
    svg << "<g id=\"panel-" << scenarios[p] << "\">\n";
    svg << "<rect x=\"" << fixed(x0, 2) << "\" y=\"" << fixed(kTop, 2) << "\" width=\""
        << fixed(kPanelW, 2) << "\" height=\"" << fixed(kPlotH, 2)
        << "\" fill=\"none\" stroke=\"#888\"/>\n";
    svg << "<text x=\"" << fixed(x0 + kPanelW / 2, 2) << "\" y=\"18\" text-anchor=\"middle\">("
        << scenarios[p] << ")</text>\n";
    svg << "<line x1=\"" << fixed(x0, 2) << "\" y1=\"" << fixed(ypos(truth), 2) << "\" x2=\""
        << fixed(x0 + kPanelW, 2) << "\" y2=\"" << fixed(ypos(truth), 2)
        << "\" stroke=\"red\" stroke-dasharray=\"4 3\"/>\n";
    const double slot = kPanelW / static_cast<double>(boxes.size());
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const auto& b = boxes[k];
      const double cx = x0 + slot * (k + 0.5);
      const double half = slot * 0.3;
      svg << "<g class=\"box\" data-estimator=\"" << b.estimator << "\">\n";
      svg << "<line x1=\"" << fixed(cx, 2) << "\" y1=\"" << fixed(ypos(b.max), 2) << "\" x2=\""
          << fixed(cx, 2) << "\" y2=\"" << fixed(ypos(b.q3), 2) << "\" stroke=\"black\"/>\n";
      svg << "<line x1=\"" << fixed(cx, 2) << "\" y1=\"" << fixed(ypos(b.q1), 2) << "\" x2=\""
          << fixed(cx, 2) << "\" y2=\"" << fixed(ypos(b.min), 2) << "\" stroke=\"black\"/>\n";
      svg << "<rect x=\"" << fixed(cx - half, 2) << "\" y=\"" << fixed(ypos(b.q3), 2)
          << "\" width=\"" << fixed(2 * half, 2) << "\" height=\""
          << fixed(ypos(b.q1) - ypos(b.q3), 2) << "\" fill=\"#cde\" stroke=\"black\"/>\n";
      svg << "<line x1=\"" << fixed(cx - half, 2) << "\" y1=\"" << fixed(ypos(b.median), 2)
          << "\" x2=\"" << fixed(cx + half, 2) << "\" y2=\"" << fixed(ypos(b.median), 2)
          << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << fixed(cx, 2) << "\" y=\"" << fixed(kTop + kPlotH + 16, 2)
          << "\" text-anchor=\"middle\">" << b.estimator << "</text>\n";
      svg << "</g>\n";
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace attmiss
