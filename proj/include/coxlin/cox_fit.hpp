#ifndef COXLIN_COX_FIT_HPP_
#define COXLIN_COX_FIT_HPP_

#include <stdexcept>
#include <string_view>

#include <Eigen/Dense>

#include "coxlin/dataset.hpp"

namespace coxlin {

// Raised when a model quantity is undefined for the given input, e.g. a
// partial likelihood with no covariates or a variance from one subject.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FitStatus { converged, max_iterations, separation_detected, singular_information };

std::string_view to_string(FitStatus status);

struct CoxFit {
  Eigen::VectorXd beta_hat;
  double log_partial_likelihood = 0.0;
  double score_norm = 0.0;
  Eigen::MatrixXd information;  // observed information, minus the Hessian
  int iterations = 0;
  FitStatus status = FitStatus::max_iterations;

  bool converged() const { return status == FitStatus::converged; }
};

struct FitOptions {
  double tol = 1e-10;          // on the Euclidean norm of the score
  // Also converged once the Newton step is below step_tol * max(1, |beta|):
  // at large n the score cannot get under `tol` through rounding alone.
  double step_tol = 1e-10;
  int max_iter = 50;
  int max_halvings = 30;
  double separation_norm = 30.0;
  double max_condition = 1e12;
};

// Log partial likelihood with Breslow's handling of ties: every event at a
// tied time sees the full risk set {T_j >= T_i}. The risk-set sums are
// taken relative to max beta'Z once that exceeds 700, so large linear
// predictors do not overflow.
double log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta);

struct ScoreInformation {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

ScoreInformation score_and_information(const SurvivalDataset& data, const Eigen::VectorXd& beta);

// Newton-Raphson with step halving. Never throws for a fit that fails to
// converge; the reason is reported in CoxFit::status.
CoxFit fit_mple(const SurvivalDataset& data, const Eigen::VectorXd& init, const FitOptions& options = {});
CoxFit fit_mple(const SurvivalDataset& data, const FitOptions& options = {});

// Per-subject score contributions (n x p); the rows sum to the score.
//   U_i = Delta_i (Z_i - Zbar(T_i)) - e^{beta'Z_i} sum_{t_k <= T_i} d_k (Z_i - Zbar(t_k)) / S0(t_k)
Eigen::MatrixXd score_residuals(const SurvivalDataset& data, const Eigen::VectorXd& beta);

}  // namespace coxlin

#endif  // COXLIN_COX_FIT_HPP_
