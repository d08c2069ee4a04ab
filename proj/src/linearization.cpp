#include "coxlin/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coxlin/quadrature.hpp"
#include "coxlin/risk_engine.hpp"

namespace coxlin {

namespace {

// Per-piece tolerance; pieces number at most a few times n.
constexpr double kPieceTolerance = 1e-12;

void validate_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("evaluation grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(grid[k]) || grid[k] < 0.0) throw std::invalid_argument("grid points must be finite and >= 0");
    if (k > 0 && !(grid[k] > grid[k - 1])) throw std::invalid_argument("grid must be strictly increasing");
  }
}

// cumulative[j] = int_0^{points[j]} f for sorted, distinct, nonnegative points.
template <class F>
std::vector<double> cumulative_integral(F&& f, const std::vector<double>& points) {
  std::vector<double> out(points.size());
  double total = 0.0;
  double left = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    total += integrate(f, left, points[j], kPieceTolerance);
    out[j] = total;
    left = points[j];
  }
  return out;
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double lookup(const std::vector<double>& points, const std::vector<double>& values, double x) {
  const auto it = std::lower_bound(points.begin(), points.end(), x);
  return values[static_cast<std::size_t>(it - points.begin())];
}

double risk_of(const TruthModel& truth, const Observation& o) {
  return truth.covariate_dim() == 0 ? 1.0 : std::exp(truth.beta0().dot(o.covariates));
}

// K(s) = int_0^s lambda_0 / Phi(beta0, .) tabulated at `points`.
struct HazardOverRisk {
  std::vector<double> points;
  std::vector<double> values;

  HazardOverRisk(const TruthModel& truth, std::vector<double> pts) : points(sorted_unique(std::move(pts))) {
    values = cumulative_integral([&](double u) { return truth.baseline_hazard(u) / truth.phi(u); }, points);
  }
  double operator()(double s) const { return lookup(points, values, s); }
};

void require_truth_support(const TruthModel& truth, double upper) {
  if (!(truth.phi(upper) > 0.0)) {
    throw ModelError("grid extends to " + std::to_string(upper) + " where Phi(beta0, .) = 0");
  }
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

std::vector<double> uniform_grid(double upper, int points) {
  if (points < 2 || !(upper > 0.0)) throw std::invalid_argument("uniform_grid needs upper > 0 and points >= 2");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = upper * k / (points - 1);
  g.back() = upper;
  return g;
}

double plugin_upper_limit(const SurvivalDataset& data, const Eigen::VectorXd& beta, double threshold) {
  const RiskAggregates agg = build_aggregates(data, beta);
  double best = -1.0;
  for (int k = 0; k < agg.groups(); ++k) {
    if (agg.s0(k) / agg.n() >= threshold) best = agg.distinct_times()[static_cast<std::size_t>(k)];
  }
  if (best < 0.0) throw ModelError("Phi_n is below the threshold at every follow-up time");
  return best;
}

std::vector<double> merge_with_jumps(const std::vector<double>& grid, const StepCurve& curve) {
  validate_grid(grid);
  std::vector<double> merged = grid;
  for (double t : curve.jump_times()) {
    if (t <= grid.back()) merged.push_back(t);
  }
  return sorted_unique(std::move(merged));
}

std::string_view to_string(InfluenceMode mode) { return mode == InfluenceMode::plugin ? "plugin" : "truth"; }

InfluenceMatrix xi_plugin(const SurvivalDataset& data, const CoxFit& fit, const std::vector<double>& grid) {
  if (!fit.converged()) throw ModelError("plug-in influence needs a converged fit");
  return xi_plugin(data, fit.beta_hat, grid);
}

InfluenceMatrix xi_plugin(const SurvivalDataset& data, const Eigen::VectorXd& beta, const std::vector<double>& grid) {
  validate_grid(grid);
  const RiskAggregates agg = build_aggregates(data, beta);
  if (!(phi_n(agg, grid.back()) > 0.0)) {
    throw ModelError("grid point " + std::to_string(grid.back()) + " lies beyond the last follow-up time");
  }
  const BaselineCumHazEstimate lambda = breslow_plugin(data, beta);
  const int n = data.size();
  const RiskSetIndex& idx = agg.index();

  // G(x) = sum_{u <= x} dLambda_n(u) / Phi_n(beta, u), with Phi_n = s0 / n.
  std::vector<double> g_values;
  g_values.reserve(lambda.curve.size());
  double g = 0.0;
  for (std::size_t k = 0; k < lambda.curve.size(); ++k) {
    const int group = idx.first_at_or_after(lambda.curve.jump_times()[k]);
    g += lambda.curve.increment(k) * n / agg.s0(group);
    g_values.push_back(g);
  }
  const StepCurve g_curve(lambda.curve.jump_times(), std::move(g_values));

  InfluenceMatrix out;
  out.grid = grid;
  out.mode = InfluenceMode::plugin;
  out.values.resize(n, static_cast<Eigen::Index>(grid.size()));
  for (int i = 0; i < n; ++i) {
    const Observation& o = data[i];
    const double risk = std::exp(agg.linear_predictor()[i]);
    const double own = o.event ? n / agg.s0(idx.time_index[static_cast<std::size_t>(i)]) : 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double x = grid[k];
      double v = -risk * g_curve(std::min(x, o.time));
      if (o.time <= x) v += own;
      out.values(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

InfluenceMatrix xi_truth(const SurvivalDataset& data, const TruthModel& truth, const std::vector<double>& grid) {
  validate_grid(grid);
  if (data.covariate_dim() != truth.covariate_dim()) throw std::invalid_argument("dataset and truth differ in p");
  const double upper = grid.back();
  require_truth_support(truth, upper);

  std::vector<double> pts = grid;
  for (const auto& o : data.observations()) {
    if (o.time < upper) pts.push_back(o.time);
  }
  const HazardOverRisk cum(truth, std::move(pts));

  InfluenceMatrix out;
  out.grid = grid;
  out.mode = InfluenceMode::truth;
  out.values.resize(data.size(), static_cast<Eigen::Index>(grid.size()));
  for (int i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    const double risk = risk_of(truth, o);
    const double own = (o.event && o.time <= upper) ? 1.0 / truth.phi(o.time) : 0.0;
    const double k_at_t = o.time < upper ? cum(o.time) : 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double x = grid[k];
      double v = -risk * (o.time < x ? k_at_t : cum(x));
      if (o.time <= x) v += own;
      out.values(i, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

std::vector<double> xi_truth_mean(const SurvivalDataset& data, const TruthModel& truth,
                                  const std::vector<double>& grid) {
  validate_grid(grid);
  if (data.covariate_dim() != truth.covariate_dim()) throw std::invalid_argument("dataset and truth differ in p");
  const double upper = grid.back();
  require_truth_support(truth, upper);
  const int n = data.size();

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return data[a].time < data[b].time; });
  std::vector<double> times(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) times[static_cast<std::size_t>(r)] = data[order[static_cast<std::size_t>(r)]].time;

  std::vector<double> pts = grid;
  for (double t : times) {
    if (t < upper) pts.push_back(t);
  }
  const HazardOverRisk cum(truth, std::move(pts));

  // Prefix sums in time order: risk * K(T), risk, and Delta / Phi(T).
  std::vector<double> risk_k(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> risk_sum(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> own(static_cast<std::size_t>(n) + 1, 0.0);
  for (int r = 0; r < n; ++r) {
    const Observation& o = data[order[static_cast<std::size_t>(r)]];
    const double risk = risk_of(truth, o);
    const auto next = static_cast<std::size_t>(r) + 1;
    const bool inside = o.time < upper;
    risk_k[next] = risk_k[next - 1] + (inside ? risk * cum(o.time) : 0.0);
    risk_sum[next] = risk_sum[next - 1] + risk;
    own[next] = own[next - 1] + ((o.event && o.time <= upper) ? 1.0 / truth.phi(o.time) : 0.0);
  }

  std::vector<double> means(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid[k];
    const auto below = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), x) - times.begin());
    const auto at_or_below =
        static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), x) - times.begin());
    const double integral_part = risk_k[below] + cum(x) * (risk_sum[static_cast<std::size_t>(n)] - risk_sum[below]);
    means[k] = (own[at_or_below] - integral_part) / n;
  }
  return means;
}

Eigen::MatrixXd a0_values(const TruthModel& truth, const std::vector<double>& grid) {
  validate_grid(grid);
  require_truth_support(truth, grid.back());
  const int p = truth.covariate_dim();
  Eigen::MatrixXd out(p, static_cast<Eigen::Index>(grid.size()));
  for (int j = 0; j < p; ++j) {
    const auto column = cumulative_integral(
        [&](double u) { return truth.d1(u)[j] * truth.baseline_hazard(u) / truth.phi(u); }, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) out(j, static_cast<Eigen::Index>(k)) = column[k];
  }
  return out;
}

namespace {

VarianceEstimate variance_from_terms(const Eigen::MatrixXd& total, const Eigen::MatrixXd& xi,
                                     const std::vector<double>& grid) {
  const auto n = total.rows();
  if (n < 2) throw ModelError("variance estimate needs at least two observations");
  VarianceEstimate out;
  out.grid = grid;
  const auto sample_variance = [n](const auto& column) {
    const double mean = column.mean();
    return (column.array() - mean).square().sum() / static_cast<double>(n - 1);
  };
  for (Eigen::Index k = 0; k < total.cols(); ++k) {
    out.variance.push_back(sample_variance(total.col(k)) / static_cast<double>(n));
    out.variance_xi_only.push_back(sample_variance(xi.col(k)) / static_cast<double>(n));
  }
  return out;
}

}  // namespace

VarianceEstimate variance_estimate(const SurvivalDataset& data, const CoxFit& fit, const InfluenceMatrix& infl,
                                   const PluginACurve& a_curve) {
  if (data.covariate_dim() == 0) return variance_estimate(data, infl);
  if (!fit.converged()) throw ModelError("variance estimate needs a converged fit");
  if (infl.values.rows() != data.size()) throw std::invalid_argument("influence matrix does not match the dataset");
  if (data.size() < 2) throw ModelError("variance estimate needs at least two observations");
  if (static_cast<int>(a_curve.components.size()) != data.covariate_dim()) {
    throw std::invalid_argument("A_n curve dimension does not match the dataset");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.information, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw ModelError("information matrix is singular");

  const int n = data.size();
  // Rows l_i' = n U_i' I^{-1}.
  const Eigen::MatrixXd residuals = score_residuals(data, fit.beta_hat);
  const Eigen::MatrixXd beta_influence = n * fit.information.ldlt().solve(residuals.transpose()).transpose();

  Eigen::MatrixXd total = infl.values;
  for (std::size_t k = 0; k < infl.grid.size(); ++k) {
    const Eigen::VectorXd a = a_curve(infl.grid[k]);
    total.col(static_cast<Eigen::Index>(k)) -= beta_influence * a;
  }
  return variance_from_terms(total, infl.values, infl.grid);
}

VarianceEstimate variance_estimate(const SurvivalDataset& data, const InfluenceMatrix& infl) {
  if (infl.values.rows() != data.size()) throw std::invalid_argument("influence matrix does not match the dataset");
  return variance_from_terms(infl.values, infl.values, infl.grid);
}

double DecompositionReport::identity_error() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    worst = std::max(worst, std::abs(t_n2[k] - (b_n[k] + c_n[k] + r_n3[k] + r_n4[k])));
  }
  return worst;
}

DecompositionReport remainder_decomposition(const SurvivalDataset& data, const CoxFit& fit, const TruthModel& truth,
                                            const std::vector<double>& grid) {
  if (!fit.converged()) throw ModelError("remainder decomposition needs a converged fit");
  return remainder_decomposition(data, fit.beta_hat, truth, grid);
}

DecompositionReport remainder_decomposition(const SurvivalDataset& data, const Eigen::VectorXd& beta_hat,
                                            const TruthModel& truth, const std::vector<double>& grid) {
  validate_grid(grid);
  if (data.covariate_dim() != truth.covariate_dim()) throw std::invalid_argument("dataset and truth differ in p");
  const double upper = grid.back();
  require_truth_support(truth, upper);
  const Eigen::VectorXd& beta0 = truth.beta0();
  const RiskAggregates agg0 = build_aggregates(data, beta0);
  if (!(phi_n(agg0, upper) > 0.0)) {
    throw ModelError("grid extends to " + std::to_string(upper) + " where the empirical risk set is empty");
  }
  const int n = data.size();
  const BaselineCumHazEstimate lambda_hat = breslow_plugin(data, beta_hat);
  const BaselineCumHazEstimate lambda_0n = breslow_plugin(data, beta0);

  // Phi_n(beta0, .) is constant on each piece (a, b] between consecutive
  // breakpoints, equal to its value at b.
  std::vector<double> breakpoints = grid;
  for (double t : agg0.distinct_times()) {
    if (t <= upper) breakpoints.push_back(t);
  }
  breakpoints = sorted_unique(std::move(breakpoints));

  std::vector<double> cum_b(breakpoints.size()), cum_r3(breakpoints.size()), cum_r4(breakpoints.size());
  {
    double sb = 0.0, s3 = 0.0, s4 = 0.0, left = 0.0;
    for (std::size_t j = 0; j < breakpoints.size(); ++j) {
      const double right = breakpoints[j];
      const double phin = phi_n(agg0, right);
      sb += integrate(
          [&](double u) {
            const double phi = truth.phi(u);
            return (phi - phin) / phi * truth.baseline_hazard(u);
          },
          left, right, kPieceTolerance);
      s3 += integrate([&](double u) { return (truth.phi(u) / phin - 1.0) * truth.baseline_hazard(u); }, left, right,
                      kPieceTolerance);
      s4 += integrate(
          [&](double u) {
            const double phi = truth.phi(u);
            const double diff = phi - phin;
            return diff * diff / (phi * phin) * truth.baseline_hazard(u);
          },
          left, right, kPieceTolerance);
      cum_b[j] = sb;
      cum_r3[j] = s3;
      cum_r4[j] = s4;
      left = right;
    }
  }

  // Empirical sums over events in time order.
  std::vector<double> event_times;
  std::vector<double> inv_phi, inv_diff;
  {
    std::vector<int> events;
    for (int i = 0; i < n; ++i) {
      if (data[i].event && data[i].time <= upper) events.push_back(i);
    }
    std::sort(events.begin(), events.end(), [&](int a, int b) { return data[a].time < data[b].time; });
    double a = 0.0, b = 0.0;
    for (int i : events) {
      const double t = data[i].time;
      const double phi = truth.phi(t);
      const double phin = agg0.s0(agg0.index().time_index[static_cast<std::size_t>(i)]) / n;
      a += 1.0 / phi;
      b += 1.0 / phin - 1.0 / phi;
      event_times.push_back(t);
      inv_phi.push_back(a);
      inv_diff.push_back(b);
    }
  }
  const auto empirical = [&](const std::vector<double>& prefix, double x) {
    const auto m = std::upper_bound(event_times.begin(), event_times.end(), x) - event_times.begin();
    return m == 0 ? 0.0 : prefix[static_cast<std::size_t>(m) - 1] / n;
  };

  const std::vector<double> mean_xi = xi_truth_mean(data, truth, grid);
  const Eigen::MatrixXd a0 = a0_values(truth, grid);
  const Eigen::VectorXd delta_beta = beta_hat - beta0;

  DecompositionReport rep;
  rep.grid = grid;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid[k];
    const double cum_hazard = truth.cumulative_baseline_hazard(x);
    const double hat = lambda_hat(x);
    const double at_truth = lambda_0n(x);
    const double b_n = lookup(breakpoints, cum_b, x);
    const double r3_integral = lookup(breakpoints, cum_r3, x);
    const double r_n4 = lookup(breakpoints, cum_r4, x);
    const double beta_term = delta_beta.size() == 0 ? 0.0 : -delta_beta.dot(a0.col(static_cast<Eigen::Index>(k)));

    rep.t_n1.push_back(hat - at_truth);
    rep.t_n2.push_back(at_truth - cum_hazard);
    rep.b_n.push_back(b_n);
    rep.c_n.push_back(empirical(inv_phi, x) - cum_hazard);
    rep.r_n3.push_back(empirical(inv_diff, x) - r3_integral);
    rep.r_n4.push_back(r_n4);
    rep.mean_xi.push_back(mean_xi[k]);
    rep.beta_term.push_back(beta_term);
    rep.r_n.push_back(hat - cum_hazard - mean_xi[k] - beta_term);
  }
  rep.sup_norms = {max_abs(rep.t_n1), max_abs(rep.t_n2), max_abs(rep.b_n),     max_abs(rep.c_n),     max_abs(rep.r_n3),
                   max_abs(rep.r_n4), max_abs(rep.r_n),  max_abs(rep.mean_xi), max_abs(rep.beta_term)};
  return rep;
}

}  // namespace coxlin
