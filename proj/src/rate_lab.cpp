#include "coxlin/rate_lab.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <thread>

#include "coxlin/breslow.hpp"
#include "coxlin/cox_fit.hpp"
#include "coxlin/dataset.hpp"
#include "coxlin/linearization.hpp"
#include "coxlin/risk_engine.hpp"
#include "coxlin/truth.hpp"

namespace coxlin {

namespace {

constexpr double kUpperThreshold = 0.05;
constexpr double kExclusionCap = 0.01;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("invalid " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return value;
}

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

std::vector<double> grid_with(double upper, int points, const std::vector<double>& jumps) {
  std::vector<double> grid = uniform_grid(upper, points);
  for (double t : jumps) {
    if (t <= upper) grid.push_back(t);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct Replicate {
  std::vector<double> values;
  double upper = 0.0;
};

class Runner {
 public:
  explicit Runner(const ExperimentConfig& config)
      : config_(config), truth_(truth_by_name(config.truth)), beta0_(truth_.beta0()) {
    if (config_.m_policy.kind == MPolicy::Kind::truth) truth_upper_ = truth_.upper_limit(kUpperThreshold);
    if (config_.m_policy.kind == MPolicy::Kind::fixed) {
      if (!(truth_.phi(config_.m_policy.value) > 0.0)) {
        throw ConfigError("M = " + std::to_string(config_.m_policy.value) + " lies outside the censoring support");
      }
    }
  }

  std::vector<std::string> names() const {
    switch (config_.claim) {
      case Claim::lemma1:
        if (truth_.covariate_dim() == 0) return {"sup_phi"};
        return {"sup_phi", "sup_d1"};
      case Claim::lemma2:
        return {"sup_r_n3", "sup_r_n4"};
      case Claim::theorem:
        return {"sup_r_n", "sup_mean_xi", "beta_error"};
    }
    return {};
  }

  // nullopt marks an excluded replication.
  std::optional<Replicate> run(int n, std::uint64_t stream) const {
    Rng rng = Rng::substream(config_.seed, stream);
    try {
      const SurvivalDataset data = generate_dataset(truth_, n, rng);
      switch (config_.claim) {
        case Claim::lemma1:
          return lemma1(data);
        case Claim::lemma2:
          return lemma2(data);
        case Claim::theorem:
          return theorem(data);
      }
    } catch (const DataError&) {
    } catch (const ModelError&) {
    } catch (const NumericError&) {
    }
    return std::nullopt;
  }

 private:
  double upper_for(const SurvivalDataset& data, const Eigen::VectorXd& beta) const {
    switch (config_.m_policy.kind) {
      case MPolicy::Kind::truth:
        return truth_upper_;
      case MPolicy::Kind::plugin:
        return plugin_upper_limit(data, beta, kUpperThreshold);
      case MPolicy::Kind::fixed:
        return config_.m_policy.value;
    }
    return truth_upper_;
  }

  Replicate lemma1(const SurvivalDataset& data) const {
    const RiskAggregates agg = build_aggregates(data, beta0_);
    const double upper = upper_for(data, beta0_);
    const auto grid = grid_with(upper, config_.grid_points, agg.distinct_times());
    double sup_phi = 0.0, sup_d1 = 0.0;
    for (double x : grid) {
      sup_phi = std::max(sup_phi, std::abs(phi_n(agg, x) - truth_.phi(x)));
      if (truth_.covariate_dim() > 0) sup_d1 = std::max(sup_d1, max_abs_diff(d1_n(agg, x), truth_.d1(x)));
    }
    if (truth_.covariate_dim() == 0) return {{sup_phi}, upper};
    return {{sup_phi, sup_d1}, upper};
  }

  Replicate lemma2(const SurvivalDataset& data) const {
    const double upper = upper_for(data, beta0_);
    const BaselineCumHazEstimate lambda = breslow_plugin(data, beta0_);
    const auto grid = grid_with(upper, config_.grid_points, lambda.curve.jump_times());
    const DecompositionReport rep = remainder_decomposition(data, beta0_, truth_, grid);
    return {{rep.sup_norms.r_n3, rep.sup_norms.r_n4}, upper};
  }

  std::optional<Replicate> theorem(const SurvivalDataset& data) const {
    Eigen::VectorXd beta = beta0_;
    double beta_error = 0.0;
    if (truth_.covariate_dim() > 0 && !config_.force_beta0) {
      const CoxFit fit = fit_mple(data);
      if (!fit.converged()) return std::nullopt;
      beta = fit.beta_hat;
      beta_error = (beta - beta0_).norm();
    }
    const double upper = upper_for(data, beta);
    const BaselineCumHazEstimate lambda = breslow_plugin(data, beta);
    const auto grid = grid_with(upper, config_.grid_points, lambda.curve.jump_times());
    const std::vector<double> mean_xi = xi_truth_mean(data, truth_, grid);
    const Eigen::MatrixXd a0 = a0_values(truth_, grid);
    const Eigen::VectorXd delta = beta - beta0_;
    double sup_r = 0.0, sup_xi = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double beta_term = delta.size() == 0 ? 0.0 : -delta.dot(a0.col(static_cast<Eigen::Index>(k)));
      const double r =
          lambda(grid[k]) - truth_.cumulative_baseline_hazard(grid[k]) - mean_xi[k] - beta_term;
      sup_r = std::max(sup_r, std::abs(r));
      sup_xi = std::max(sup_xi, std::abs(mean_xi[k]));
    }
    return Replicate{{sup_r, sup_xi, beta_error}, upper};
  }

  const ExperimentConfig& config_;
  TruthModel truth_;
  Eigen::VectorXd beta0_;
  double truth_upper_ = 0.0;
};

double normalizer(Claim claim, ANChoice a_n, int n) {
  if (claim == Claim::lemma1) return std::sqrt(static_cast<double>(n));
  return a_n_value(a_n, n) * n;
}

double quantile(const std::vector<double>& sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string_view to_string(Claim claim) {
  switch (claim) {
    case Claim::lemma1:
      return "lemma1";
    case Claim::lemma2:
      return "lemma2";
    case Claim::theorem:
      return "theorem";
  }
  return "unknown";
}

Claim parse_claim(std::string_view text) {
  text = trim(text);
  if (text == "lemma1") return Claim::lemma1;
  if (text == "lemma2") return Claim::lemma2;
  if (text == "theorem") return Claim::theorem;
  throw ConfigError("unknown claim '" + std::string(text) + "' (expected lemma1, lemma2 or theorem)");
}

std::string_view to_string(ANChoice choice) { return choice == ANChoice::inv_log ? "inv_log" : "inv_log_log"; }

ANChoice parse_a_n(std::string_view text) {
  text = trim(text);
  if (text == "inv_log" || text == "1/log") return ANChoice::inv_log;
  if (text == "inv_log_log" || text == "1/loglog") return ANChoice::inv_log_log;
  throw ConfigError("unknown a_n choice '" + std::string(text) + "' (expected inv_log or inv_log_log)");
}

double a_n_value(ANChoice choice, int n) {
  if (n < 3) throw std::invalid_argument("a_n needs n >= 3");
  const double l = std::log(static_cast<double>(n));
  return choice == ANChoice::inv_log ? 1.0 / l : 1.0 / std::log(l);
}

std::string MPolicy::describe() const {
  switch (kind) {
    case Kind::truth:
      return "truth";
    case Kind::plugin:
      return "plugin";
    case Kind::fixed: {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, value);
      return std::string(buf, res.ptr);
    }
  }
  return "truth";
}

MPolicy MPolicy::parse(std::string_view text) {
  text = trim(text);
  if (text == "truth") return {Kind::truth, 0.0};
  if (text == "plugin") return {Kind::plugin, 0.0};
  const double v = parse_number<double>(text, "M_policy");
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("fixed M must be positive");
  return {Kind::fixed, v};
}

void ExperimentConfig::validate() const {
  if (sample_sizes.size() < 2) throw ConfigError("sample_sizes needs at least two values");
  for (std::size_t j = 0; j < sample_sizes.size(); ++j) {
    if (sample_sizes[j] < 3) throw ConfigError("sample sizes must be at least 3");
    if (j > 0 && sample_sizes[j] <= sample_sizes[j - 1]) throw ConfigError("sample_sizes must be strictly ascending");
  }
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (replications > (1 << 30)) throw ConfigError("too many replications");
  if (grid_points < 2) throw ConfigError("grid_points must be at least 2");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  const auto names = truth_names();
  if (std::find(names.begin(), names.end(), truth) == names.end()) {
    throw ConfigError("unknown truth model '" + truth + "'");
  }
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  text = trim(text);
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<int>(text.substr(0, comma), "integer list entry"));
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
    if (trim(text).empty()) throw ConfigError("trailing comma in integer list");
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

ExperimentConfig parse_experiment_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string_view key = trim(view.substr(0, eq));
    const std::string_view value = trim(view.substr(eq + 1));
    try {
      if (key == "truth") {
        base.truth = std::string(value);
      } else if (key == "sample_sizes") {
        base.sample_sizes = parse_int_list(value);
      } else if (key == "replications") {
        base.replications = parse_number<int>(value, "replications");
      } else if (key == "a_n") {
        base.a_n = parse_a_n(value);
      } else if (key == "seed") {
        base.seed = parse_number<std::uint64_t>(value, "seed");
      } else if (key == "grid_points") {
        base.grid_points = parse_number<int>(value, "grid_points");
      } else if (key == "M_policy") {
        base.m_policy = MPolicy::parse(value);
      } else if (key == "claim") {
        base.claim = parse_claim(value);
      } else {
        throw ConfigError("unknown key '" + std::string(key) + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_experiment_config(in, std::move(base));
}

Summary summarize(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = s.sd = s.median = s.q05 = s.q25 = s.q75 = s.q95 = kNaN;
    return s;
  }
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / s.count;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = s.count > 1 ? std::sqrt(ss / (s.count - 1)) : kNaN;
  s.median = quantile(values, 0.5);
  s.q05 = quantile(values, 0.05);
  s.q25 = quantile(values, 0.25);
  s.q75 = quantile(values, 0.75);
  s.q95 = quantile(values, 0.95);
  return s;
}

SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs two or more points");
  const auto k = static_cast<double>(x.size());
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(y[i] > 0.0 ? std::log(y[i]) : kNaN);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (x.size() < 3) {
    fit.standard_error = kNaN;
  } else {
    double sse = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double r = ly[i] - fit.intercept - fit.slope * lx[i];
      sse += r * r;
    }
    fit.standard_error = std::sqrt(sse / (k - 2.0) / sxx);
  }
  return fit;
}

const TrackedQuantity& RateExperimentResult::quantity(std::string_view name) const {
  for (const auto& q : quantities) {
    if (q.name == name) return q;
  }
  throw std::out_of_range("no tracked quantity named '" + std::string(name) + "'");
}

RateExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Runner runner(config);
  const auto names = runner.names();
  const std::size_t sizes = config.sample_sizes.size();
  const auto reps = static_cast<std::size_t>(config.replications);
  const std::size_t tasks = sizes * reps;

  std::vector<std::optional<Replicate>> results(tasks);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks; t = next++) {
      const std::size_t j = t / reps;
      const std::size_t r = t % reps;
      results[t] = runner.run(config.sample_sizes[j], (static_cast<std::uint64_t>(j) << 32) | r);
    }
  };
  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::size_t>(tasks, 256))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  RateExperimentResult out;
  out.config = config;
  for (const auto& name : names) {
    TrackedQuantity q;
    q.name = name;
    q.samples.assign(sizes, std::vector<double>(reps, kNaN));
    out.quantities.push_back(std::move(q));
  }
  out.excluded.assign(sizes, 0);
  out.upper_limits.assign(sizes, kNaN);
  for (std::size_t j = 0; j < sizes; ++j) {
    double upper_total = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& res = results[j * reps + r];
      if (!res) {
        ++out.excluded[j];
        continue;
      }
      upper_total += res->upper;
      for (std::size_t m = 0; m < names.size(); ++m) out.quantities[m].samples[j][r] = res->values[m];
    }
    const int kept = config.replications - out.excluded[j];
    if (kept > 0) out.upper_limits[j] = upper_total / kept;
    if (out.excluded[j] > kExclusionCap * config.replications && out.valid) {
      out.valid = false;
      out.invalid_reason = std::to_string(out.excluded[j]) + " of " + std::to_string(config.replications) +
                           " replications excluded at n = " + std::to_string(config.sample_sizes[j]) +
                           " (cap 1%)";
    }
  }

  std::vector<double> ns(config.sample_sizes.begin(), config.sample_sizes.end());
  for (auto& q : out.quantities) {
    std::vector<double> means;
    for (std::size_t j = 0; j < sizes; ++j) {
      q.per_n.push_back(summarize(q.samples[j]));
      means.push_back(q.per_n.back().mean);
    }
    q.slope = fit_log_log(ns, means);
  }

  const TrackedQuantity& primary = out.quantities.front();
  for (std::size_t j = 0; j < sizes; ++j) {
    const double scale = normalizer(config.claim, config.a_n, config.sample_sizes[j]);
    std::vector<double> scaled = primary.samples[j];
    for (double& v : scaled) v *= scale;
    out.normalized_median.push_back(summarize(std::move(scaled)).median);
  }
  const auto [lo, hi] = std::minmax_element(out.normalized_median.begin(), out.normalized_median.end());
  out.normalized_ratio = *hi / *lo;
  out.span_warning = std::log10(ns.back() / ns.front()) < 1.5;
  return out;
}

RateExperimentResult lemma1_experiment(ExperimentConfig config) {
  config.claim = Claim::lemma1;
  return run_experiment(config);
}

RateExperimentResult lemma2_experiment(ExperimentConfig config) {
  config.claim = Claim::lemma2;
  return run_experiment(config);
}

RateExperimentResult theorem_rate_experiment(ExperimentConfig config) {
  config.claim = Claim::theorem;
  return run_experiment(config);
}

}  // namespace coxlin
