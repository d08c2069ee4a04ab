#ifndef COXLIN_BRESLOW_HPP_
#define COXLIN_BRESLOW_HPP_

#include <vector>

#include <Eigen/Dense>

#include "coxlin/dataset.hpp"
#include "coxlin/step_curve.hpp"

namespace coxlin {

// Breslow estimate of the baseline cumulative hazard: a right-continuous
// step curve with a jump at every distinct event time.
struct BaselineCumHazEstimate {
  StepCurve curve;
  Eigen::VectorXd beta_used;
  double last_follow_up = 0.0;

  double operator()(double x) const { return curve(x); }
  // True when x lies past the largest follow-up time, where the risk set is
  // empty and the curve is only extended as a constant.
  bool beyond_support(double x) const { return x > last_follow_up; }
};

// The vector curve A_n(x) = sum_{event times t_k <= x} d_k S1(t_k) / S0(t_k)^2,
// i.e. (1/n) sum_{events} D_n^(1)(beta, T_i) / Phi_n(beta, T_i)^2, stored
// one StepCurve per coordinate. Equals minus the beta-gradient of
// Lambda_n(beta, x).
struct PluginACurve {
  std::vector<StepCurve> components;
  Eigen::VectorXd beta_used;

  bool empty() const { return components.empty(); }
  Eigen::VectorXd operator()(double x) const;
};

// Sum over distinct event times of d_i / sum_{T_j >= X_(i)} exp(beta'Z_j),
// with risk-set denominators from a direct backward pass over the data.
BaselineCumHazEstimate breslow_traditional(const SurvivalDataset& data, const Eigen::VectorXd& beta);

// Integral of delta {u <= x} / Phi_n(beta, u) against the empirical measure,
// evaluated through the risk engine.
BaselineCumHazEstimate breslow_plugin(const SurvivalDataset& data, const Eigen::VectorXd& beta);

// Returns an empty curve when the dataset has no covariates.
PluginACurve a_n_curve(const SurvivalDataset& data, const Eigen::VectorXd& beta);

// sup over jump points of |a - b| / (1 + a(max time)). Both estimates must
// share jump times.
double relative_disagreement(const BaselineCumHazEstimate& a, const BaselineCumHazEstimate& b);

}  // namespace coxlin

#endif  // COXLIN_BRESLOW_HPP_
