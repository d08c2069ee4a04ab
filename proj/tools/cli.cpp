#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "coxlin/cox_fit.hpp"
#include "coxlin/dataset.hpp"
#include "coxlin/linearization.hpp"
#include "coxlin/quadrature.hpp"
#include "coxlin/rate_lab.hpp"
#include "coxlin/risk_engine.hpp"
#include "coxlin/truth.hpp"

namespace coxlin::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

class SelfCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised after a subcommand has already reported its failure.
struct ExitWith {
  int code;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

struct Options {
  std::string output_dir;
  std::string format = "csv";

  std::string input;
  std::string truth;
  int n = 1000;
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool grid_given = false;

  double tol = 1e-10;
  int max_iter = 50;
  std::string beta;
  bool force_beta0 = false;

  int grid_points = 512;
  std::optional<double> upper;
  std::string mode = "plugin";

  std::string config;
  std::string claim;
  std::string sample_sizes;
  int replications = 0;
  std::string a_n;
  std::string m_policy;
  int threads = 0;
};

class Command {
 public:
  Command(Options opts, std::ostream& out, std::ostream& err, const Hooks& hooks)
      : o_(std::move(opts)), out_(out), err_(err), hooks_(hooks) {}

  int fit();
  int breslow();
  int influence();
  int decompose();
  int rate_lab();

 private:
  fs::path output_path(const std::string& name) const {
    fs::path dir = o_.output_dir;
    if (dir.empty()) {
      const char* env = std::getenv(kOutputDirEnv);
      dir = (env != nullptr && *env != '\0') ? fs::path(env) : fs::path(".");
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir / name;
  }

  std::ofstream open(const std::string& name) {
    const fs::path path = output_path(name);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    written_.push_back(path.string());
    return f;
  }

  void write_json(const std::string& name, const Json& j) {
    std::ofstream f = open(name);
    f << j.dump(2) << '\n';
    if (!f) throw IoError("write failed for '" + name + "'");
  }

  void report_written() {
    for (const auto& w : written_) out_ << "wrote " << w << '\n';
  }

  FitOptions fit_options() const {
    FitOptions f;
    f.tol = o_.tol;
    f.max_iter = o_.max_iter;
    return f;
  }

  std::optional<TruthModel> truth() const {
    if (o_.truth.empty()) return std::nullopt;
    return truth_by_name(o_.truth);
  }

  SurvivalDataset dataset() const {
    if (!o_.input.empty()) return load_csv(o_.input);
    if (!o_.truth.empty()) return generate_dataset(truth_by_name(o_.truth), o_.n, o_.seed);
    throw std::invalid_argument("an --input CSV or a --truth model is required");
  }

  std::optional<Eigen::VectorXd> beta_option(int p) const {
    if (o_.beta.empty()) return std::nullopt;
    std::vector<double> values;
    std::string_view rest = o_.beta;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v)) {
        throw std::invalid_argument("invalid --beta entry '" + std::string(item) + "'");
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    // A zero vector stands for "no covariate effect", also when p = 0.
    if (p == 0) {
      for (double v : values) {
        if (v != 0.0) throw std::invalid_argument("--beta must be 0 for data without covariates");
      }
      return Eigen::VectorXd();
    }
    if (static_cast<int>(values.size()) != p) {
      throw std::invalid_argument("--beta has " + std::to_string(values.size()) + " entries, the data has p = " +
                                  std::to_string(p));
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), p);
  }

  // beta-hat for a dataset with p >= 1; reports and aborts on failure.
  CoxFit fitted(const SurvivalDataset& data) {
    CoxFit f = fit_mple(data, fit_options());
    if (!f.converged()) {
      err_ << "error: fit failed: " << to_string(f.status) << '\n';
      throw ExitWith{kModelError};
    }
    return f;
  }

  Options o_;
  std::ostream& out_;
  std::ostream& err_;
  const Hooks& hooks_;
  std::vector<std::string> written_;
};

int Command::fit() {
  const SurvivalDataset data = dataset();
  if (data.covariate_dim() == 0) throw ModelError("fit needs at least one covariate");
  const CoxFit f = fit_mple(data, fit_options());
  Json j;
  j["status"] = std::string(to_string(f.status));
  j["converged"] = f.converged();
  j["beta_hat"] = vector_json(f.beta_hat);
  j["log_partial_likelihood"] = f.log_partial_likelihood;
  j["score_norm"] = f.score_norm;
  j["information"] = matrix_json(f.information);
  j["iterations"] = f.iterations;
  j["n"] = data.size();
  j["p"] = data.covariate_dim();
  j["events"] = data.event_count();
  write_json("fit.json", j);
  report_written();
  if (!f.converged()) {
    err_ << "error: fit failed: " << to_string(f.status) << '\n';
    return kModelError;
  }
  return kOk;
}

int Command::breslow() {
  const SurvivalDataset data = dataset();
  const int p = data.covariate_dim();
  Eigen::VectorXd beta;
  if (auto b = beta_option(p)) {
    beta = *b;
  } else if (p > 0) {
    beta = fitted(data).beta_hat;
  }
  const BaselineCumHazEstimate traditional = breslow_traditional(data, beta);
  BaselineCumHazEstimate plugin = breslow_plugin(data, beta);
  if (hooks_.tamper_plugin) hooks_.tamper_plugin(plugin);
  const double gap = relative_disagreement(traditional, plugin);
  if (!(gap <= kBreslowAgreement)) {
    throw SelfCheckError("Breslow forms disagree (relative difference " + num(gap) + ")");
  }

  {
    std::ofstream f = open("breslow.csv");
    f << "x,value\n";
    for (std::size_t k = 0; k < plugin.curve.size(); ++k) {
      f << num(plugin.curve.jump_times()[k]) << ',' << num(plugin.curve.values()[k]) << '\n';
    }
  }
  {
    const PluginACurve a = a_n_curve(data, beta);
    std::ofstream f = open("a_n.csv");
    f << 'x';
    for (int j = 1; j <= p; ++j) f << ",a" << j;
    f << '\n';
    if (p > 0) {
      for (double x : plugin.curve.jump_times()) {
        const Eigen::VectorXd v = a(x);
        f << num(x);
        for (int j = 0; j < p; ++j) f << ',' << num(v[j]);
        f << '\n';
      }
    }
  }
  report_written();
  return kOk;
}

int Command::influence() {
  const SurvivalDataset data = dataset();
  const int p = data.covariate_dim();
  InfluenceMatrix infl;
  std::optional<VarianceEstimate> variance;
  if (o_.mode == "truth") {
    const auto t = truth();
    if (!t) throw std::invalid_argument("--mode truth needs --truth");
    const double upper = o_.upper ? *o_.upper : t->upper_limit();
    infl = xi_truth(data, *t, uniform_grid(upper, o_.grid_points));
  } else {
    if (p > 0) {
      const CoxFit f = fitted(data);
      const double upper = o_.upper ? *o_.upper : plugin_upper_limit(data, f.beta_hat);
      infl = xi_plugin(data, f, uniform_grid(upper, o_.grid_points));
      variance = variance_estimate(data, f, infl, a_n_curve(data, f.beta_hat));
    } else {
      const Eigen::VectorXd none;
      const double upper = o_.upper ? *o_.upper : plugin_upper_limit(data, none);
      infl = xi_plugin(data, none, uniform_grid(upper, o_.grid_points));
      variance = variance_estimate(data, infl);
    }
  }

  if (o_.format == "json") {
    Json j;
    j["mode"] = std::string(to_string(infl.mode));
    j["grid"] = infl.grid;
    j["column_means"] = vector_json(infl.column_means());
    j["values"] = matrix_json(infl.values);
    write_json("influence.json", j);
    if (variance) {
      Json v;
      v["grid"] = variance->grid;
      v["variance"] = variance->variance;
      v["variance_xi_only"] = variance->variance_xi_only;
      write_json("variance.json", v);
    }
  } else {
    {
      std::ofstream f = open("influence.csv");
      f << "subject";
      for (double x : infl.grid) f << ',' << num(x);
      f << '\n';
      for (Eigen::Index i = 0; i < infl.values.rows(); ++i) {
        f << i + 1;
        for (Eigen::Index k = 0; k < infl.values.cols(); ++k) f << ',' << num(infl.values(i, k));
        f << '\n';
      }
    }
    if (variance) {
      std::ofstream f = open("variance.csv");
      f << "x,variance,variance_xi_only\n";
      for (std::size_t k = 0; k < variance->grid.size(); ++k) {
        f << num(variance->grid[k]) << ',' << num(variance->variance[k]) << ','
          << num(variance->variance_xi_only[k]) << '\n';
      }
    }
  }
  report_written();
  return kOk;
}

int Command::decompose() {
  const auto t = truth();
  if (!t) throw std::invalid_argument("decompose needs --truth");
  const SurvivalDataset data = dataset();
  const int p = data.covariate_dim();
  Eigen::VectorXd beta = t->beta0();
  if (o_.force_beta0) {
    if (!o_.beta.empty()) throw std::invalid_argument("--beta and --force-beta0 are exclusive");
  } else if (auto b = beta_option(p)) {
    beta = *b;
  } else if (p > 0) {
    beta = fitted(data).beta_hat;
  }
  const double upper = o_.upper ? *o_.upper : t->upper_limit();
  const BaselineCumHazEstimate lambda = breslow_plugin(data, beta);
  const auto grid = merge_with_jumps(uniform_grid(upper, o_.grid_points), lambda.curve);
  const DecompositionReport rep = remainder_decomposition(data, beta, *t, grid);

  const std::vector<std::pair<const char*, const std::vector<double>*>> columns{
      {"t_n1", &rep.t_n1}, {"t_n2", &rep.t_n2}, {"b_n", &rep.b_n},         {"c_n", &rep.c_n},
      {"r_n3", &rep.r_n3}, {"r_n4", &rep.r_n4}, {"r_n", &rep.r_n},         {"mean_xi", &rep.mean_xi},
      {"beta_term", &rep.beta_term}};
  if (o_.format == "json") {
    Json j;
    j["truth"] = t->name();
    j["beta"] = vector_json(beta);
    j["M"] = upper;
    j["identity_error"] = rep.identity_error();
    const auto& s = rep.sup_norms;
    j["sup_norms"] = {{"t_n1", s.t_n1}, {"t_n2", s.t_n2}, {"b_n", s.b_n},         {"c_n", s.c_n},
                      {"r_n3", s.r_n3}, {"r_n4", s.r_n4}, {"r_n", s.r_n},         {"mean_xi", s.mean_xi},
                      {"beta_term", s.beta_term}};
    j["grid"] = rep.grid;
    for (const auto& [name, values] : columns) j[name] = *values;
    write_json("decomposition.json", j);
  } else {
    std::ofstream f = open("decomposition.csv");
    f << 'x';
    for (const auto& c : columns) f << ',' << c.first;
    f << '\n';
    for (std::size_t k = 0; k < rep.grid.size(); ++k) {
      f << num(rep.grid[k]);
      for (const auto& c : columns) f << ',' << num((*c.second)[k]);
      f << '\n';
    }
  }
  out_ << "identity error " << num(rep.identity_error()) << ", sup|R_n| " << num(rep.sup_norms.r_n) << '\n';
  report_written();
  return kOk;
}

Json summary_json(int n, const Summary& s) {
  return {{"n", n},          {"count", s.count}, {"mean", s.mean}, {"sd", s.sd},   {"median", s.median},
          {"q05", s.q05},    {"q25", s.q25},     {"q75", s.q75},   {"q95", s.q95}};
}

int Command::rate_lab() {
  ExperimentConfig cfg;
  if (!o_.config.empty()) cfg = load_experiment_config(o_.config, cfg);
  if (!o_.claim.empty()) cfg.claim = parse_claim(o_.claim);
  if (!o_.truth.empty()) cfg.truth = o_.truth;
  if (!o_.sample_sizes.empty()) cfg.sample_sizes = parse_int_list(o_.sample_sizes);
  if (o_.replications > 0) cfg.replications = o_.replications;
  if (!o_.a_n.empty()) cfg.a_n = parse_a_n(o_.a_n);
  if (o_.seed_given) cfg.seed = o_.seed;
  if (o_.grid_given) cfg.grid_points = o_.grid_points;
  if (!o_.m_policy.empty()) cfg.m_policy = MPolicy::parse(o_.m_policy);
  cfg.force_beta0 = o_.force_beta0;
  cfg.threads = o_.threads;
  cfg.validate();

  out_ << "seed = " << cfg.seed << '\n';
  const RateExperimentResult res = run_experiment(cfg);
  if (res.span_warning) err_ << "warning: sample sizes span less than 1.5 decades; slopes are imprecise\n";

  Json j;
  j["claim"] = std::string(to_string(cfg.claim));
  j["truth"] = cfg.truth;
  j["seed"] = cfg.seed;
  j["sample_sizes"] = cfg.sample_sizes;
  j["replications"] = cfg.replications;
  j["a_n"] = std::string(to_string(cfg.a_n));
  j["grid_points"] = cfg.grid_points;
  j["M_policy"] = cfg.m_policy.describe();
  j["force_beta0"] = cfg.force_beta0;
  j["primary"] = res.primary().name;
  j["fitted_slope"] = res.fitted_slope();
  j["slope_standard_error"] = res.primary().slope.standard_error;
  j["valid"] = res.valid;
  j["invalid_reason"] = res.invalid_reason;
  j["span_warning"] = res.span_warning;
  j["excluded"] = res.excluded;
  j["upper_limits"] = res.upper_limits;
  j["normalized_statistic"] = {{"scale", cfg.claim == Claim::lemma1 ? "sqrt(n)" : "a_n*n"},
                               {"medians", res.normalized_median},
                               {"max_min_ratio", res.normalized_ratio}};
  Json quantities = Json::array();
  for (const auto& q : res.quantities) {
    Json per_n = Json::array();
    for (std::size_t k = 0; k < q.per_n.size(); ++k) per_n.push_back(summary_json(cfg.sample_sizes[k], q.per_n[k]));
    quantities.push_back({{"name", q.name},
                          {"slope", q.slope.slope},
                          {"slope_standard_error", q.slope.standard_error},
                          {"intercept", q.slope.intercept},
                          {"per_n", std::move(per_n)}});
  }
  j["quantities"] = std::move(quantities);
  write_json("rates.json", j);

  for (std::size_t k = 0; k < cfg.sample_sizes.size(); ++k) {
    std::ofstream f = open("rates_n" + std::to_string(cfg.sample_sizes[k]) + ".csv");
    f << "replication";
    for (const auto& q : res.quantities) f << ',' << q.name;
    f << '\n';
    for (int r = 0; r < cfg.replications; ++r) {
      f << r;
      for (const auto& q : res.quantities) {
        const double v = q.samples[k][static_cast<std::size_t>(r)];
        f << ',';
        if (std::isfinite(v)) f << num(v);
      }
      f << '\n';
    }
  }
  out_ << "fitted slope " << num(res.fitted_slope()) << " (SE " << num(res.primary().slope.standard_error)
       << ")\n";
  report_written();
  if (!res.valid) {
    err_ << "error: experiment invalid: " << res.invalid_reason << '\n';
    return kInvalidExperiment;
  }
  return kOk;
}

void add_output(CLI::App* sub, Options& o, bool with_format) {
  sub->add_option("-o,--output-dir", o.output_dir,
                  std::string("Output directory (default: $") + kOutputDirEnv + " or the current directory)");
  if (with_format) {
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  }
}

void add_data(CLI::App* sub, Options& o) {
  sub->add_option("-i,--input", o.input, "Input CSV (header time,event,z1,...,zp)");
  sub->add_option("--truth", o.truth, "Truth model name; simulates data when no --input is given");
  sub->add_option("--n", o.n, "Sample size for simulated data")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Seed for simulated data");
}

void add_fit(CLI::App* sub, Options& o) {
  sub->add_option("--tol", o.tol, "Score-norm tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", o.max_iter, "Newton-Raphson iteration limit")->check(CLI::NonNegativeNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks) {
  Options o;
  CLI::App app{"Cox model estimators, linearization diagnostics and rate experiments", "coxlin"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "Maximum partial likelihood fit; writes fit.json");
  add_data(fit, o);
  add_fit(fit, o);
  add_output(fit, o, false);

  auto* breslow = app.add_subcommand("breslow", "Breslow estimate; writes breslow.csv and a_n.csv");
  add_data(breslow, o);
  add_fit(breslow, o);
  breslow->add_option("--beta", o.beta, "Comma-separated beta to use instead of fitting");
  add_output(breslow, o, false);

  auto* influence = app.add_subcommand("influence", "Influence values and plug-in variance");
  add_data(influence, o);
  add_fit(influence, o);
  influence->add_option("--mode", o.mode, "plugin or truth")->check(CLI::IsMember({"plugin", "truth"}));
  influence->add_option("--grid-points", o.grid_points, "Points of the grid on [0, M]")
      ->check(CLI::Range(2, 1 << 20));
  influence->add_option("--M", o.upper, "Upper end of the grid")->check(CLI::PositiveNumber);
  add_output(influence, o, true);

  auto* decompose = app.add_subcommand("decompose", "Remainder decomposition against a truth model");
  add_data(decompose, o);
  add_fit(decompose, o);
  decompose->add_option("--beta", o.beta, "Comma-separated beta to use instead of fitting");
  decompose->add_flag("--force-beta0", o.force_beta0, "Use the true beta0 in place of beta-hat");
  decompose->add_option("--grid-points", o.grid_points, "Points of the grid on [0, M]")
      ->check(CLI::Range(2, 1 << 20));
  decompose->add_option("--M", o.upper, "Upper end of the grid")->check(CLI::PositiveNumber);
  add_output(decompose, o, true);

  auto* rate = app.add_subcommand("rate-lab", "Monte Carlo rate experiment; writes rates.json and per-n CSVs");
  rate->add_option("--config", o.config, "Flat key = value experiment file");
  rate->add_option("--claim", o.claim, "lemma1, lemma2 or theorem");
  rate->add_option("--truth", o.truth, "Truth model name");
  rate->add_option("--n,--sample-sizes", o.sample_sizes, "Comma-separated ascending sample sizes");
  rate->add_option("--reps,--replications", o.replications, "Replications per sample size")
      ->check(CLI::PositiveNumber);
  rate->add_option("--a-n", o.a_n, "inv_log or inv_log_log");
  auto* seed_opt = rate->add_option("--seed", o.seed, "Master seed");
  auto* grid_opt = rate->add_option("--grid-points", o.grid_points, "Points of the grid on [0, M]");
  rate->add_option("--M-policy", o.m_policy, "truth, plugin or a fixed number");
  rate->add_flag("--force-beta0", o.force_beta0, "theorem: use beta0 in place of beta-hat");
  rate->add_option("--threads", o.threads, "Worker threads (0: all cores); results do not depend on it")
      ->check(CLI::NonNegativeNumber);
  add_output(rate, o, false);

  std::vector<std::string> argv_store{"coxlin"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kIoError;
  }
  o.seed_given = seed_opt->count() > 0;
  o.grid_given = grid_opt->count() > 0;

  Command cmd(o, out, err, hooks);
  try {
    if (fit->parsed()) return cmd.fit();
    if (breslow->parsed()) return cmd.breslow();
    if (influence->parsed()) return cmd.influence();
    if (decompose->parsed()) return cmd.decompose();
    return cmd.rate_lab();
  } catch (const ExitWith& e) {
    return e.code;
  } catch (const SelfCheckError& e) {
    err << "error: self-check failed: " << e.what() << '\n';
    return kSelfCheck;
  } catch (const ModelError& e) {
    err << "error: model: " << e.what() << '\n';
    return kModelError;
  } catch (const NumericError& e) {
    err << "error: numeric: " << e.what() << '\n';
    return kModelError;
  } catch (const QuadratureError& e) {
    err << "error: quadrature: " << e.what() << '\n';
    return kModelError;
  } catch (const IoError& e) {
    err << "error: I/O: " << e.what() << '\n';
    return kIoError;
  } catch (const DataError& e) {
    err << "error: data: " << e.what() << '\n';
    return kIoError;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
}

}  // namespace coxlin::cli
