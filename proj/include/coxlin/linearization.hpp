#ifndef COXLIN_LINEARIZATION_HPP_
#define COXLIN_LINEARIZATION_HPP_

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coxlin/breslow.hpp"
#include "coxlin/cox_fit.hpp"
#include "coxlin/dataset.hpp"
#include "coxlin/truth.hpp"

namespace coxlin {

// Evaluation grids ----------------------------------------------------------

// `points` equally spaced values on [0, upper], both ends included.
std::vector<double> uniform_grid(double upper, int points);

// Largest distinct follow-up time t with Phi_n(beta, t) >= threshold.
double plugin_upper_limit(const SurvivalDataset& data, const Eigen::VectorXd& beta, double threshold = 0.05);

// Sorted union of `grid` and the jump points of `curve` that do not exceed
// the last grid point.
std::vector<double> merge_with_jumps(const std::vector<double>& grid, const StepCurve& curve);

// Influence function --------------------------------------------------------

enum class InfluenceMode { plugin, truth };
std::string_view to_string(InfluenceMode mode);

// Entry (i, k) is xi(T_i, Delta_i, Z_i; grid[k]).
struct InfluenceMatrix {
  std::vector<double> grid;
  Eigen::MatrixXd values;
  InfluenceMode mode = InfluenceMode::plugin;

  Eigen::VectorXd column_means() const { return values.colwise().mean().transpose(); }
};

// Plug-in influence values
//   xi(t, d, z; x) = -e^{beta'z} sum_{event times u <= min(x, t)} dLambda_n(u) / Phi_n(beta, u)
//                    + d {t <= x} / Phi_n(beta, t),
// with dLambda_n the Breslow jumps at beta. Throws ModelError when the fit
// has not converged or a grid point lies where the risk set is empty.
InfluenceMatrix xi_plugin(const SurvivalDataset& data, const CoxFit& fit, const std::vector<double>& grid);
InfluenceMatrix xi_plugin(const SurvivalDataset& data, const Eigen::VectorXd& beta, const std::vector<double>& grid);

// True influence values
//   xi(t, d, z; x) = -e^{beta0'z} int_0^{min(x, t)} lambda_0(u) / Phi(beta0, u) du
//                    + d {t <= x} / Phi(beta0, t),
// integrating by adaptive quadrature against the truth model.
InfluenceMatrix xi_truth(const SurvivalDataset& data, const TruthModel& truth, const std::vector<double>& grid);

// Column means of xi_truth through sorted prefix sums, O((n + |grid|) log n)
// instead of O(n |grid|).
std::vector<double> xi_truth_mean(const SurvivalDataset& data, const TruthModel& truth,
                                  const std::vector<double>& grid);

// A_0(x) = int_0^x D^(1)(beta0, u) lambda_0(u) / Phi(beta0, u) du at each grid
// point (columns of a p x |grid| matrix).
Eigen::MatrixXd a0_values(const TruthModel& truth, const std::vector<double>& grid);

// Plug-in variance ------------------------------------------------------------

struct VarianceEstimate {
  std::vector<double> grid;
  std::vector<double> variance;          // estimated Var(Lambda_n(x))
  std::vector<double> variance_xi_only;  // ignoring the beta-hat term
};

// v(x) = (1/n) * sample variance over i of xi_i(x) - l_i' A_n(x), where
// l_i = (I / n)^{-1} U_i is the subject's influence on beta-hat (U_i its
// score residual, I the total information). With p = 0 use the overload
// without a fit. Throws ModelError for n = 1 or a singular information.
VarianceEstimate variance_estimate(const SurvivalDataset& data, const CoxFit& fit, const InfluenceMatrix& infl,
                                   const PluginACurve& a_curve);
VarianceEstimate variance_estimate(const SurvivalDataset& data, const InfluenceMatrix& infl);

// Remainder decomposition ----------------------------------------------------

// Per grid point x (beta0 from the truth model):
//   t_n1 = Lambda_n(beta_hat, x) - Lambda_n(beta0, x)
//   t_n2 = Lambda_n(beta0, x) - Lambda_0(x) = b_n + c_n + r_n3 + r_n4
//   b_n  = int_0^x (Phi - Phi_n) / Phi lambda_0 du
//   c_n  = (1/n) sum_{events, T_i <= x} 1 / Phi(T_i) - Lambda_0(x)
//   r_n3 = (1/n) sum_{events, T_i <= x} (1/Phi_n - 1/Phi)(T_i) - int_0^x (Phi/Phi_n - 1) lambda_0 du
//   r_n4 = int_0^x (Phi - Phi_n)^2 / (Phi Phi_n) lambda_0 du
//   mean_xi   = column mean of xi_truth
//   beta_term = -(beta_hat - beta0)' A_0(x)
//   r_n = Lambda_n(beta_hat, x) - Lambda_0(x) - mean_xi - beta_term
// Phi, Phi_n are evaluated at beta0; each integral is its own quadrature.
struct DecompositionReport {
  std::vector<double> grid;
  std::vector<double> t_n1, t_n2, b_n, c_n, r_n3, r_n4, r_n, mean_xi, beta_term;

  struct SupNorms {
    double t_n1 = 0, t_n2 = 0, b_n = 0, c_n = 0, r_n3 = 0, r_n4 = 0, r_n = 0, mean_xi = 0, beta_term = 0;
  } sup_norms;

  // max_k |t_n2 - (b_n + c_n + r_n3 + r_n4)|
  double identity_error() const;
};

DecompositionReport remainder_decomposition(const SurvivalDataset& data, const CoxFit& fit, const TruthModel& truth,
                                            const std::vector<double>& grid);
DecompositionReport remainder_decomposition(const SurvivalDataset& data, const Eigen::VectorXd& beta_hat,
                                            const TruthModel& truth, const std::vector<double>& grid);

}  // namespace coxlin

#endif  // COXLIN_LINEARIZATION_HPP_
