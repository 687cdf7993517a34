#include <doctest.h>

#include <sstream>

#include "attmiss/data.hpp"
#include "attmiss/error.hpp"

using namespace attmiss;

TEST_CASE("csv round trip keeps values bit for bit") {
  Dataset d({ObservedRecord::complete(0.1, 1, -2.5, 1.0 / 3.0), ObservedRecord::missing(3.25, 0, 1e-9)});
  std::stringstream io;
  write_csv(io, d);
  const Dataset back = read_csv(io);
  REQUIRE(back.n() == 2);
  CHECK(back[0].y == d[0].y);
  CHECK(*back[0].l == *d[0].l);
  CHECK_FALSE(back[1].l.has_value());
  CHECK(back[1].c == d[1].c);
}

TEST_CASE("columns may come in any order") {
  std::istringstream in("r,l,y,a,c\n1,0.5,2,1,3\n0,,1,0,0\n");
  const Dataset d = read_csv(in);
  CHECK(d[0].l.value() == 0.5);
  CHECK(d[0].y == 2.0);
  CHECK(d[1].r == 0);
}

TEST_CASE("missing r column is a parse error naming it") {
  std::istringstream in("y,a,c,l\n1,0,0,1\n");
  try {
    read_csv(in);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("'r'") != std::string::npos);
  }
}

TEST_CASE("parse errors carry the line number") {
  std::istringstream bad_l("y,a,c,l,r\n1,0,0,1,1\n1,0,0,,1\n");
  CHECK_THROWS_WITH_AS(read_csv(bad_l), doctest::Contains("line 3"), Error);
  std::istringstream bad_a("y,a,c,l,r\n1,2,0,1,1\n");
  CHECK_THROWS_WITH_AS(read_csv(bad_a), doctest::Contains("line 2"), Error);
  std::istringstream ragged("y,a,c,l,r\n1,0,0\n");
  CHECK_THROWS_AS(read_csv(ragged), Error);
}

TEST_CASE("validate lists each violation with its record") {
  Dataset d({ObservedRecord{1.0, 1, 0.0, std::nullopt, 1}, ObservedRecord{1.0, 3, 0.0, 2.0, 1}});
  const auto report = validate(d);
  REQUIRE(report.size() >= 2);
  CHECK(report[0].record == 0u);
  CHECK(report[1].record == 1u);
  CHECK(validate(Dataset({ObservedRecord::complete(0, 1, 0, 0), ObservedRecord::missing(0, 0, 0)}))
            .empty());
}

TEST_CASE("single treatment arm is a dataset-level positivity violation") {
  const auto report = validate(Dataset({ObservedRecord::complete(0, 1, 0, 0)}));
  REQUIRE(report.size() == 1);
  CHECK_FALSE(report[0].record.has_value());
}

TEST_CASE("complete_cases") {
  Dataset d({ObservedRecord::missing(0, 0, 0), ObservedRecord::complete(1, 1, 1, 1)});
  CHECK(complete_cases(d).n() == 1);
  CHECK_THROWS_AS(complete_cases(Dataset({ObservedRecord::missing(0, 0, 0)})), Error);
}
