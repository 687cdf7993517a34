#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace attmiss {

// One subject: outcome y, treatment a, always-observed covariate c, the
// confounder l (absent when unobserved) and its observation indicator r.
struct ObservedRecord {
  double y = 0.0;
  int a = 0;
  double c = 0.0;
  std::optional<double> l;
  int r = 0;

  static ObservedRecord complete(double y, int a, double c, double l) {
    return {y, a, c, l, 1};
  }
  static ObservedRecord missing(double y, int a, double c) {
    return {y, a, c, std::nullopt, 0};
  }
};

// Immutable collection of records. Construction never rejects data;
// use validate() to obtain the list of invariant violations.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<ObservedRecord> records)
      : records_(std::move(records)) {}

  std::size_t n() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ObservedRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<ObservedRecord>& records() const noexcept { return records_; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  std::size_t count_observed() const;
  std::size_t count_treated() const;
  bool all_observed() const { return count_observed() == n(); }

 private:
  std::vector<ObservedRecord> records_;
};

struct Violation {
  // Record index, or nullopt for dataset-level violations.
  std::optional<std::size_t> record;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate(const Dataset& dataset);

// Records with r = 1, order preserved. Throws Error(no_complete_cases) when
// nothing is left.
Dataset complete_cases(const Dataset& dataset);

// CSV with header `y,a,c,l,r` (any column order); `l` is empty when r = 0.
// Throws Error(parse) with a 1-based line number on malformed input.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const Dataset& dataset);
void write_csv_file(const std::string& path, const Dataset& dataset);

}  // namespace attmiss
