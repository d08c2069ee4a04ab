#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "coxlin/dataset.hpp"
#include "coxlin/step_curve.hpp"
#include "oracles.hpp"

using namespace coxlin;

namespace {

SurvivalDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("validate_dataset accepts a minimal dataset") {
  const auto d = validate_dataset({{1.0, true, {0.0}}});
  CHECK(d.size() == 1);
  CHECK(d.covariate_dim() == 1);
}

TEST_CASE("validate_dataset rejects inconsistent covariate lengths") {
  CHECK_THROWS_WITH_AS(validate_dataset({{1.0, true, {1.0}}, {2.0, false, {0.0, 1.0}}}),
                       doctest::Contains("inconsistent covariate lengths"), DataError);
}

TEST_CASE("validate_dataset rejects data without events") {
  CHECK_THROWS_WITH_AS(validate_dataset({{1.0, false, {}}, {2.0, false, {}}}), doctest::Contains("no events"),
                       DataError);
}

TEST_CASE("validate_dataset rejects bad times and covariates") {
  CHECK_THROWS_AS(validate_dataset({{0.0, true, {}}}), DataError);
  CHECK_THROWS_AS(validate_dataset({{-1.0, true, {}}}), DataError);
  CHECK_THROWS_AS(validate_dataset({{INFINITY, true, {}}}), DataError);
  CHECK_THROWS_AS(validate_dataset({{NAN, true, {}}}), DataError);
  CHECK_THROWS_AS(validate_dataset({{1.0, true, {NAN}}}), DataError);
  CHECK_THROWS_AS(validate_dataset({}), DataError);
}

TEST_CASE("tied times are kept at ingestion") {
  const auto d = validate_dataset({{1.0, true, {}}, {1.0, true, {}}, {1.0, false, {}}});
  CHECK(d.size() == 3);
  CHECK(d.event_count() == 2);
}

TEST_CASE("parse_csv reads a two-row file") {
  const auto d = parse("time,event,z1\n1.0,1,0.5\n2.0,0,-0.5\n");
  REQUIRE(d.size() == 2);
  CHECK(d.covariate_dim() == 1);
  CHECK(d[0].time == 1.0);
  CHECK(d[0].event);
  CHECK(d[0].covariates[0] == 0.5);
  CHECK_FALSE(d[1].event);
  CHECK(d[1].covariates[0] == -0.5);
}

TEST_CASE("parse_csv names the row with an invalid event value") {
  const std::string msg = error_of("time,event,z1\n1.0,2,0.5\n");
  CHECK(msg.find("row 1") != std::string::npos);
}

TEST_CASE("parse_csv accepts a file without covariates") {
  const auto d = parse("time,event\n3.0,1\n");
  CHECK(d.size() == 1);
  CHECK(d.covariate_dim() == 0);
}

TEST_CASE("parse_csv event spellings") {
  const auto d = parse("time,event\n1,true\n2,FALSE\n3,0\n4,1\n");
  CHECK(d[0].event);
  CHECK_FALSE(d[1].event);
  CHECK_FALSE(d[2].event);
  CHECK(d[3].event);
}

TEST_CASE("parse_csv error cases") {
  CHECK(error_of("").find("empty") != std::string::npos);
  CHECK_FALSE(error_of("time,status,z1\n1,1,0\n").empty());
  CHECK_FALSE(error_of("time,event,z2\n1,1,0\n").empty());
  CHECK(error_of("time,event,z1\n1,1,0\n2,1\n").find("row 2") != std::string::npos);
  CHECK(error_of("time,event,z1\n1,1,abc\n").find("row 1") != std::string::npos);
  CHECK_FALSE(error_of("time,event\n-1,1\n").empty());
  CHECK_FALSE(error_of("time,event\n1,0\n").empty());
}

TEST_CASE("load_csv reports a missing file as an I/O error") {
  CHECK_THROWS_AS(load_csv("/nonexistent/dir/data.csv"), IoError);
}

TEST_CASE("CSV round trip is exact with 17 significant digits") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(-1e3, 1e3);
  for (int rep = 0; rep < 50; ++rep) {
    const int p = rep % 4;
    std::vector<Observation> rows;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> z;
      for (int j = 0; j < p; ++j) z.push_back(unif(gen) * std::pow(10.0, static_cast<int>(unif(gen)) % 30));
      rows.push_back(oracle::obs(std::abs(unif(gen)) + 1e-300, i % 3 != 0, z));
    }
    const SurvivalDataset d(rows, p);
    std::ostringstream out;
    write_csv(d, out);
    const auto back = parse(out.str());
    REQUIRE(back.size() == d.size());
    for (int i = 0; i < d.size(); ++i) {
      CHECK(back[i].time == d[i].time);
      CHECK(back[i].event == d[i].event);
      for (int j = 0; j < p; ++j) CHECK(back[i].covariates[j] == d[i].covariates[j]);
    }
  }
}

TEST_CASE("CSV round trip through a file") {
  const auto dir = std::filesystem::temp_directory_path() / "coxlin_data_model_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "data.csv";
  const auto d = oracle::three_point();
  write_csv(d, path);
  const auto back = load_csv(path);
  CHECK(back.size() == 3);
  CHECK(back[2].covariates[0] == 1.0);
}

TEST_CASE("validation never accepts malformed rows") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> pick(0, 5);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<RawObservation> raw;
    for (int i = 0; i < 5; ++i) raw.push_back({1.0 + i, true, {0.5, -0.5}});
    auto& row = raw[static_cast<std::size_t>(rep % 5)];
    switch (pick(gen)) {
      case 0: row.time = 0.0; break;
      case 1: row.time = -std::abs(row.time); break;
      case 2: row.time = NAN; break;
      case 3: row.covariates.push_back(1.0); break;
      case 4: row.covariates[0] = INFINITY; break;
      default:
        for (auto& r : raw) r.event = false;
    }
    CHECK_THROWS_AS(validate_dataset(raw), DataError);
  }
}

TEST_CASE("step curve evaluation") {
  const StepCurve c({1.0, 3.0}, {0.5, 1.2});
  CHECK(c(2.0) == 0.5);
  CHECK(c(3.0) == 1.2);
  CHECK(c(0.5) == 0.0);
  CHECK(c(1.0) == 0.5);
  CHECK(c(100.0) == 1.2);
  CHECK(c.increment(0) == 0.5);
  CHECK(c.increment(1) == doctest::Approx(0.7));
}

TEST_CASE("step curve validation") {
  CHECK_THROWS(StepCurve({1.0, 1.0}, {0.5, 1.0}));
  CHECK_THROWS(StepCurve({2.0, 1.0}, {0.5, 1.0}));
  CHECK_THROWS(StepCurve({1.0}, {0.5, 1.0}));
  CHECK_THROWS(StepCurve::nondecreasing({1.0, 2.0}, {1.0, 0.5}));
  CHECK_NOTHROW(StepCurve({1.0, 2.0}, {1.0, 0.5}));
}

TEST_CASE("step curve evaluation is nondecreasing for nondecreasing curves") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> t, v;
    double time = 0.0, value = 0.0;
    for (int k = 0; k < 1 + rep % 20; ++k) {
      time += 0.01 + unif(gen);
      value += unif(gen);
      t.push_back(time);
      v.push_back(value);
    }
    const auto c = StepCurve::nondecreasing(t, v);
    for (int q = 0; q < 50; ++q) {
      double a = unif(gen) * (time + 1.0), b = unif(gen) * (time + 1.0);
      if (a > b) std::swap(a, b);
      CHECK(c(a) <= c(b));
    }
  }
}
