#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "cli.hpp"
#include "coxlin/breslow.hpp"
#include "coxlin/dataset.hpp"
#include "coxlin/truth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using coxlin::cli::run;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("coxlin_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& name = "") const { return (name.empty() ? path : path / name).string(); }
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  double at(std::size_t row, std::size_t col) const { return std::stod(rows.at(row).at(col)); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_table(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  Table t;
  std::string line;
  std::getline(in, line);
  t.header = split(line);
  while (std::getline(in, line)) t.rows.push_back(split(line));
  return t;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int call(const std::vector<std::string>& args, const coxlin::cli::Hooks& hooks = {}) {
  std::ostringstream out, err;
  return run(args, out, err, hooks);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("fit writes fit.json") {
  TempDir dir;
  write_text(dir.path / "d.csv", "time,event,z1\n1,1,1\n2,1,0\n3,1,1\n");
  CHECK(call({"fit", "-i", dir.str("d.csv"), "-o", dir.str()}) == coxlin::cli::kOk);
  const auto j = read_json(dir.path / "fit.json");
  CHECK(j["status"] == "converged");
  CHECK(j["converged"] == true);
  CHECK(j["beta_hat"][0].get<double>() == doctest::Approx(-std::log(2.0) / 2.0).epsilon(1e-10));
  CHECK(j["n"] == 3);
  CHECK(j["p"] == 1);
  CHECK(j["events"] == 3);
  CHECK(j["information"][0][0].get<double>() > 0.0);
}

TEST_CASE("fit failures and bad input give their exit codes") {
  TempDir dir;
  write_text(dir.path / "flat.csv", "time,event,z1\n1,1,2\n2,0,2\n3,1,2\n");
  CHECK(call({"fit", "-i", dir.str("flat.csv"), "-o", dir.str()}) == coxlin::cli::kModelError);
  CHECK(read_json(dir.path / "fit.json")["status"] == "singular_information");
  write_text(dir.path / "nocov.csv", "time,event\n1,1\n2,0\n");
  CHECK(call({"fit", "-i", dir.str("nocov.csv"), "-o", dir.str()}) == coxlin::cli::kModelError);
  CHECK(call({"fit", "-i", dir.str("missing.csv"), "-o", dir.str()}) == coxlin::cli::kIoError);
  write_text(dir.path / "bad.csv", "time,event,z1\n1,1,0\n-2,1,1\n");
  CHECK(call({"fit", "-i", dir.str("bad.csv"), "-o", dir.str()}) == coxlin::cli::kIoError);
  CHECK(call({"fit", "--frobnicate"}) == coxlin::cli::kIoError);
  CHECK(call({"fit", "-o", dir.str()}) == coxlin::cli::kIoError);
  CHECK(call({"breslow", "--truth", "reference", "--n", "50", "--beta", "1,2", "-o", dir.str()}) ==
        coxlin::cli::kIoError);
  CHECK(call({}) == coxlin::cli::kIoError);
}

TEST_CASE("breslow files at a given beta") {
  TempDir dir;
  write_text(dir.path / "d.csv", "time,event,z1\n1,1,1\n2,1,0\n3,1,1\n");
  CHECK(call({"breslow", "-i", dir.str("d.csv"), "--beta", "0", "-o", dir.str()}) == coxlin::cli::kOk);
  const auto b = read_table(dir.path / "breslow.csv");
  CHECK(b.header == std::vector<std::string>{"x", "value"});
  REQUIRE(b.rows.size() == 3);
  CHECK(b.at(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(b.at(1, 1) == doctest::Approx(1.0 / 3.0 + 1.0 / 2.0));
  CHECK(b.at(2, 1) == doctest::Approx(1.0 / 3.0 + 1.0 / 2.0 + 1.0));
  const auto a = read_table(dir.path / "a_n.csv");
  CHECK(a.header == std::vector<std::string>{"x", "a1"});
  CHECK(a.at(0, 1) == doctest::Approx(2.0 / 9.0));
}

TEST_CASE("breslow without covariates is Nelson-Aalen") {
  TempDir dir;
  write_text(dir.path / "d.csv", "time,event\n1,1\n2,0\n2,1\n4,1\n");
  CHECK(call({"breslow", "-i", dir.str("d.csv"), "--beta", "0", "-o", dir.str()}) == coxlin::cli::kOk);
  const auto b = read_table(dir.path / "breslow.csv");
  REQUIRE(b.rows.size() == 3);
  CHECK(b.at(0, 1) == doctest::Approx(0.25));
  CHECK(b.at(1, 1) == doctest::Approx(0.25 + 1.0 / 3.0));
  CHECK(b.at(2, 1) == doctest::Approx(1.25 + 1.0 / 3.0));
  const auto a = read_table(dir.path / "a_n.csv");
  CHECK(a.header == std::vector<std::string>{"x"});
  CHECK(a.rows.empty());
  CHECK(call({"breslow", "-i", dir.str("d.csv"), "-o", dir.str()}) == coxlin::cli::kOk);
  CHECK(call({"breslow", "-i", dir.str("d.csv"), "--beta", "1", "-o", dir.str()}) == coxlin::cli::kIoError);
}

TEST_CASE("a disagreeing plug-in Breslow triggers the self-check") {
  TempDir dir;
  coxlin::cli::Hooks hooks;
  hooks.tamper_plugin = [](coxlin::BaselineCumHazEstimate& e) {
    std::vector<double> v = e.curve.values();
    v.back() *= 1.0 + 1e-6;
    e.curve = coxlin::StepCurve(e.curve.jump_times(), v);
  };
  const std::vector<std::string> args{"breslow", "--truth", "reference", "--n", "200", "--seed", "3", "-o", dir.str()};
  CHECK(call(args, hooks) == coxlin::cli::kSelfCheck);
  CHECK_FALSE(fs::exists(dir.path / "breslow.csv"));
  CHECK(call(args) == coxlin::cli::kOk);
}

TEST_CASE("influence CSV and JSON round trip") {
  TempDir dir;
  coxlin::write_csv(coxlin::generate_dataset(coxlin::reference_truth(), 120, 8), dir.path / "d.csv");
  CHECK(call({"influence", "-i", dir.str("d.csv"), "--grid-points", "17", "-o", dir.str()}) == coxlin::cli::kOk);
  const auto infl = read_table(dir.path / "influence.csv");
  CHECK(infl.header.size() == 18);
  CHECK(infl.header[0] == "subject");
  REQUIRE(infl.rows.size() == 120);
  CHECK(infl.rows[0][0] == "1");
  for (std::size_t k = 1; k < infl.header.size(); ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < infl.rows.size(); ++i) mean += infl.at(i, k);
    CHECK(std::abs(mean / 120.0) < 1e-10);
  }
  const auto var = read_table(dir.path / "variance.csv");
  CHECK(var.header == std::vector<std::string>{"x", "variance", "variance_xi_only"});
  CHECK(var.rows.size() == 17);
  CHECK(var.at(16, 0) == std::stod(infl.header[17]));

  CHECK(call({"influence", "-i", dir.str("d.csv"), "--grid-points", "17", "--format", "json", "-o", dir.str()}) ==
        coxlin::cli::kOk);
  const auto j = read_json(dir.path / "influence.json");
  CHECK(j["mode"] == "plugin");
  REQUIRE(j["grid"].size() == 17);
  CHECK(j["values"].size() == 120);
  // The CSV prints 17 significant digits, so the two formats agree exactly.
  for (std::size_t i = 0; i < 120; i += 17) {
    for (std::size_t k = 0; k < 17; ++k) CHECK(j["values"][i][k].get<double>() == infl.at(i, k + 1));
  }
  const auto v = read_json(dir.path / "variance.json");
  CHECK(v["variance"][5].get<double>() == var.at(5, 1));

  CHECK(call({"influence", "-i", dir.str("d.csv"), "--mode", "truth", "--truth", "reference", "--M", "1.5", "-o",
              dir.str()}) == coxlin::cli::kOk);
  CHECK(call({"influence", "-i", dir.str("d.csv"), "--mode", "truth", "-o", dir.str()}) == coxlin::cli::kIoError);
  CHECK(call({"influence", "-i", dir.str("d.csv"), "--mode", "truth", "--truth", "reference", "--M", "3.5", "-o",
              dir.str()}) == coxlin::cli::kModelError);
}

TEST_CASE("decomposition output") {
  TempDir dir;
  const std::vector<std::string> base{"decompose", "--truth", "reference", "--n", "300", "--seed", "4", "--grid-points",
                                      "32"};
  auto args = base;
  args.insert(args.end(), {"-o", dir.str()});
  CHECK(call(args) == coxlin::cli::kOk);
  const auto t = read_table(dir.path / "decomposition.csv");
  CHECK(t.header == std::vector<std::string>{"x", "t_n1", "t_n2", "b_n", "c_n", "r_n3", "r_n4", "r_n", "mean_xi",
                                             "beta_term"});
  CHECK(t.rows.size() >= 32);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(t.at(i, 2) == doctest::Approx(t.at(i, 3) + t.at(i, 4) + t.at(i, 5) + t.at(i, 6)).epsilon(1e-8).scale(1.0));
  }
  args.insert(args.end(), {"--format", "json"});
  CHECK(call(args) == coxlin::cli::kOk);
  const auto j = read_json(dir.path / "decomposition.json");
  CHECK(j["truth"] == "reference");
  CHECK(j["identity_error"].get<double>() < 1e-8);
  CHECK(j["grid"].size() == t.rows.size());
  CHECK(j["r_n"][7].get<double>() == t.at(7, 7));
  args.push_back("--force-beta0");
  CHECK(call(args) == coxlin::cli::kOk);
  const auto forced = read_json(dir.path / "decomposition.json");
  CHECK(forced["beta"][0].get<double>() == std::log(2.0));
  for (const auto& v : forced["t_n1"]) CHECK(v.get<double>() == 0.0);
  CHECK(call({"decompose", "--n", "300", "-o", dir.str()}) == coxlin::cli::kIoError);
}

TEST_CASE("rate-lab output, determinism and the output directory variable") {
  TempDir a, b;
  const std::vector<std::string> base{"rate-lab",      "--claim", "theorem", "--n", "250,500,1000", "--reps", "5",
                                      "--grid-points", "64",      "--seed",  "7"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"-o", a.str()});
  REQUIRE(call(args_a) == coxlin::cli::kOk);
  const auto j = read_json(a.path / "rates.json");
  CHECK(j["seed"] == 7);
  CHECK(j["claim"] == "theorem");
  CHECK(j["primary"] == "sup_r_n");
  CHECK(std::isfinite(j["fitted_slope"].get<double>()));
  CHECK(j["quantities"].size() == 3);
  CHECK(j["quantities"][0]["per_n"].size() == 3);
  CHECK(j["valid"] == true);
  const auto csv = read_table(a.path / "rates_n500.csv");
  CHECK(csv.header == std::vector<std::string>{"replication", "sup_r_n", "sup_mean_xi", "beta_error"});
  CHECK(csv.rows.size() == 5);
  CHECK(csv.at(0, 1) > 0.0);

  ::setenv(coxlin::cli::kOutputDirEnv, b.str().c_str(), 1);
  const int code = call(base);
  ::unsetenv(coxlin::cli::kOutputDirEnv);
  REQUIRE(code == coxlin::cli::kOk);
  CHECK(read_bytes(a.path / "rates.json") == read_bytes(b.path / "rates.json"));
  CHECK(read_bytes(a.path / "rates_n1000.csv") == read_bytes(b.path / "rates_n1000.csv"));
}

TEST_CASE("rate-lab config file and invalid runs") {
  TempDir dir;
  write_text(dir.path / "run.cfg", "claim = lemma1\nsample_sizes = 100, 200\nreplications = 3\nseed = 5\n");
  CHECK(call({"rate-lab", "--config", dir.str("run.cfg"), "--grid-points", "32", "-o", dir.str()}) ==
        coxlin::cli::kOk);
  const auto j = read_json(dir.path / "rates.json");
  CHECK(j["claim"] == "lemma1");
  CHECK(j["seed"] == 5);
  CHECK(j["normalized_statistic"]["scale"] == "sqrt(n)");
  write_text(dir.path / "bad.cfg", "colour = red\n");
  CHECK(call({"rate-lab", "--config", dir.str("bad.cfg"), "-o", dir.str()}) == coxlin::cli::kIoError);
  CHECK(call({"rate-lab", "--n", "3,4", "--reps", "20", "--grid-points", "8", "-o", dir.str()}) ==
        coxlin::cli::kInvalidExperiment);
  CHECK(read_json(dir.path / "rates.json")["valid"] == false);
}
