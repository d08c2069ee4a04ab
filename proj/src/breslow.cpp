#include "coxlin/breslow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coxlin/risk_engine.hpp"

namespace coxlin {

namespace {

void check_beta(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  if (beta.size() != data.covariate_dim()) {
    throw std::invalid_argument("beta has length " + std::to_string(beta.size()) + " but the dataset has " +
                                std::to_string(data.covariate_dim()) + " covariates");
  }
}

}  // namespace

Eigen::VectorXd PluginACurve::operator()(double x) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(components.size()));
  for (std::size_t j = 0; j < components.size(); ++j) out[static_cast<Eigen::Index>(j)] = components[j](x);
  return out;
}

BaselineCumHazEstimate breslow_traditional(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  check_beta(data, beta);
  const int n = data.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return data[a].time < data[b].time; });

  std::vector<double> risk(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double eta = beta.size() == 0 ? 0.0 : beta.dot(data[i].covariates);
    if (!std::isfinite(eta) || eta > kMaxExponent) {
      std::ostringstream os;
      os << "exp(beta'Z) overflows for row " << (i + 1) << ": beta'Z = " << eta;
      throw NumericError(os.str());
    }
    risk[static_cast<std::size_t>(i)] = std::exp(eta);
  }

  // Walk groups of tied times from the latest down, keeping the risk-set sum.
  struct Jump {
    double time;
    int events;
    double risk_sum;
  };
  std::vector<Jump> jumps;
  double risk_sum = 0.0;
  for (int hi = n; hi > 0;) {
    int lo = hi - 1;
    const double t = data[order[static_cast<std::size_t>(lo)]].time;
    while (lo > 0 && data[order[static_cast<std::size_t>(lo) - 1]].time == t) --lo;
    int events = 0;
    for (int r = lo; r < hi; ++r) {
      const int i = order[static_cast<std::size_t>(r)];
      risk_sum += risk[static_cast<std::size_t>(i)];
      if (data[i].event) ++events;
    }
    if (events > 0) jumps.push_back({t, events, risk_sum});
    hi = lo;
  }
  std::reverse(jumps.begin(), jumps.end());

  std::vector<double> times, values;
  times.reserve(jumps.size());
  values.reserve(jumps.size());
  double cumulative = 0.0;
  for (const Jump& j : jumps) {
    cumulative += j.events / j.risk_sum;
    times.push_back(j.time);
    values.push_back(cumulative);
  }
  return {StepCurve::nondecreasing(std::move(times), std::move(values)), beta, data.max_time()};
}

BaselineCumHazEstimate breslow_plugin(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  check_beta(data, beta);
  const RiskAggregates agg = build_aggregates(data, beta);
  const RiskSetIndex& idx = agg.index();

  // Empirical mass of {Delta = 1} at each distinct time, in units of 1/n.
  std::vector<int> event_mass(static_cast<std::size_t>(agg.groups()), 0);
  for (int i = 0; i < data.size(); ++i) {
    if (data[i].event) ++event_mass[static_cast<std::size_t>(idx.time_index[static_cast<std::size_t>(i)])];
  }

  std::vector<double> times, values;
  double cumulative = 0.0;
  for (int k = 0; k < agg.groups(); ++k) {
    const int mass = event_mass[static_cast<std::size_t>(k)];
    if (mass == 0) continue;
    // (mass / n) / Phi_n(beta, t_k) with the two factors of n cancelled.
    cumulative += mass / (std::exp(agg.log_scale()) * agg.s0(k));
    times.push_back(agg.distinct_times()[static_cast<std::size_t>(k)]);
    values.push_back(cumulative);
  }
  return {StepCurve::nondecreasing(std::move(times), std::move(values)), beta, data.max_time()};
}

PluginACurve a_n_curve(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  check_beta(data, beta);
  PluginACurve out;
  out.beta_used = beta;
  const int p = data.covariate_dim();
  if (p == 0) return out;

  const RiskAggregates agg = build_aggregates(data, beta);
  const RiskSetIndex& idx = agg.index();
  std::vector<double> times;
  std::vector<std::vector<double>> values(static_cast<std::size_t>(p));
  Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < agg.groups(); ++k) {
    const int d = idx.event_counts[static_cast<std::size_t>(k)];
    if (d == 0) continue;
    const double s0 = agg.s0(k);
    cumulative += (d / (s0 * s0)) * agg.s1(k);
    times.push_back(idx.distinct_times[static_cast<std::size_t>(k)]);
    for (int j = 0; j < p; ++j) values[static_cast<std::size_t>(j)].push_back(cumulative[j]);
  }
  for (int j = 0; j < p; ++j) out.components.emplace_back(times, std::move(values[static_cast<std::size_t>(j)]));
  return out;
}

double relative_disagreement(const BaselineCumHazEstimate& a, const BaselineCumHazEstimate& b) {
  std::vector<double> points = a.curve.jump_times();
  points.insert(points.end(), b.curve.jump_times().begin(), b.curve.jump_times().end());
  double worst = 0.0;
  for (double x : points) worst = std::max(worst, std::abs(a(x) - b(x)));
  const double top = a.curve.empty() ? 0.0 : a.curve.values().back();
  return worst / (1.0 + top);
}

}  // namespace coxlin
