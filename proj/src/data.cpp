#include "attmiss/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "attmiss/error.hpp"

namespace attmiss {

std::size_t Dataset::count_observed() const {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [](const auto& r) { return r.r == 1; }));
}

std::size_t Dataset::count_treated() const {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [](const auto& r) { return r.a == 1; }));
}

ValidationReport validate(const Dataset& dataset) {
  ValidationReport report;
  if (dataset.empty()) {
    report.push_back({std::nullopt, "dataset has no records"});
    return report;
  }
  bool any_treated = false;
  bool any_control = false;
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    const auto& rec = dataset[i];
    if (rec.a != 0 && rec.a != 1) {
      report.push_back({i, "a must be 0 or 1"});
    }
    if (rec.r != 0 && rec.r != 1) {
      report.push_back({i, "r must be 0 or 1"});
    }
    if (rec.r == 1 && !rec.l) {
      report.push_back({i, "r = 1 but l is absent"});
    }
    if (rec.r == 0 && rec.l) {
      report.push_back({i, "r = 0 but l is present"});
    }
    if (!std::isfinite(rec.y) || !std::isfinite(rec.c) ||
        (rec.l && !std::isfinite(*rec.l))) {
      report.push_back({i, "non-finite value"});
    }
    any_treated = any_treated || rec.a == 1;
    any_control = any_control || rec.a == 0;
  }
  if (!any_treated || !any_control) {
    report.push_back(
        {std::nullopt, "positivity: both a = 1 and a = 0 must occur"});
  }
  return report;
}

Dataset complete_cases(const Dataset& dataset) {
  std::vector<ObservedRecord> kept;
  kept.reserve(dataset.n());
  std::copy_if(dataset.begin(), dataset.end(), std::back_inserter(kept),
               [](const auto& r) { return r.r == 1; });
  if (kept.empty()) {
    throw Error(ErrorKind::no_complete_cases, "no record has r = 1");
  }
  return Dataset(std::move(kept));
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

std::string trim(std::string s) {
  const auto ws = " \t\r";
  s.erase(0, s.find_first_not_of(ws));
  const auto last = s.find_last_not_of(ws);
  s.erase(last == std::string::npos ? 0 : last + 1);
  return s;
}

double parse_real(const std::string& text, std::size_t line, const char* column) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": column '" +
                                      column + "' is not a number: '" + text + "'");
  }
  return value;
}

int parse_binary(const std::string& text, std::size_t line, const char* column) {
  const double v = parse_real(text, line, column);
  if (v != 0.0 && v != 1.0) {
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": column '" +
                                      column + "' must be 0 or 1");
  }
  return static_cast<int>(v);
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::parse, "line 1: missing header");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
    line.erase(0, 3);  // UTF-8 BOM
  }
  const auto header = split_fields(line);
  constexpr std::array<const char*, 5> names{"y", "a", "c", "l", "r"};
  std::array<std::size_t, 5> pos{};
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](const auto& h) { return trim(h) == names[k]; });
    if (it == header.end()) {
      throw Error(ErrorKind::parse,
                  std::string("line 1: header is missing column '") + names[k] + "'");
    }
    pos[k] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<ObservedRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));
    }
    ObservedRecord rec;
    rec.y = parse_real(trim(fields[pos[0]]), line_no, "y");
    rec.a = parse_binary(trim(fields[pos[1]]), line_no, "a");
    rec.c = parse_real(trim(fields[pos[2]]), line_no, "c");
    rec.r = parse_binary(trim(fields[pos[4]]), line_no, "r");
    const auto l_text = trim(fields[pos[3]]);
    if (!l_text.empty()) {
      rec.l = parse_real(l_text, line_no, "l");
    }
    if ((rec.r == 1) != rec.l.has_value()) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) +
                                        ": l must be present exactly when r = 1");
    }
    records.push_back(rec);
  }
  return Dataset(std::move(records));
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::parse, "cannot open '" + path + "'");
  }
  return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "y,a,c,l,r\n";
  for (const auto& rec : dataset) {
    out << num(rec.y) << ',' << rec.a << ',' << num(rec.c) << ','
        << (rec.l ? num(*rec.l) : std::string()) << ',' << rec.r << '\n';
  }
}

void write_csv_file(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorKind::config, "cannot write '" + path + "'");
  }
  write_csv(out, dataset);
}

}  // namespace attmiss
