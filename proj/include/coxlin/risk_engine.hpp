#ifndef COXLIN_RISK_ENGINE_HPP_
#define COXLIN_RISK_ENGINE_HPP_

#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "coxlin/dataset.hpp"

namespace coxlin {

// Raised when exp(beta'Z) would overflow or is not finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Largest exponent accepted by the risk engine before exp() overflows.
inline constexpr double kMaxExponent = 709.0;

// Time ordering of a dataset, independent of beta. Observations sharing a
// follow-up time form one group; group k covers order[group_start[k]] up to
// order[group_start[k+1]-1].
struct RiskSetIndex {
  std::vector<int> order;
  std::vector<double> distinct_times;
  std::vector<int> group_start;
  std::vector<int> event_counts;
  std::vector<int> time_index;  // observation -> its group

  static RiskSetIndex build(const SurvivalDataset& data);

  int groups() const { return static_cast<int>(distinct_times.size()); }
  // First group whose time is >= x, or groups() if none.
  int first_at_or_after(double x) const;
};

// Suffix sums over the risk sets {T_j >= t_k} at every distinct follow-up
// time t_k:
//   s0[k] = sum exp(beta'Z_j - log_scale)
//   s1[k] = sum Z_j exp(beta'Z_j - log_scale)          (column k, p rows)
//   s2[k] = sum Z_j Z_j' exp(beta'Z_j - log_scale)     (p x p)
// The sums are unnormalized; Phi_n(beta, t_k) = exp(log_scale) s0[k] / n.
// Immutable once built.
class RiskAggregates {
 public:
  const Eigen::VectorXd& beta() const { return beta_; }
  int n() const { return n_; }
  int covariate_dim() const { return static_cast<int>(beta_.size()); }
  double log_scale() const { return log_scale_; }
  const RiskSetIndex& index() const { return *index_; }
  std::shared_ptr<const RiskSetIndex> shared_index() const { return index_; }
  const std::vector<double>& distinct_times() const { return index_->distinct_times; }
  int groups() const { return index_->groups(); }

  double s0(int k) const { return s0_[k]; }
  const Eigen::VectorXd& s0() const { return s0_; }
  Eigen::MatrixXd::ConstColXpr s1(int k) const { return s1_.col(k); }
  Eigen::Map<const Eigen::MatrixXd> s2(int k) const;

  // beta'Z_i in the dataset's row order.
  const Eigen::VectorXd& linear_predictor() const { return eta_; }

 private:
  friend RiskAggregates build_aggregates(const SurvivalDataset&, std::shared_ptr<const RiskSetIndex>,
                                         const Eigen::VectorXd&, double);
  Eigen::VectorXd beta_;
  int n_ = 0;
  double log_scale_ = 0.0;
  std::shared_ptr<const RiskSetIndex> index_;
  Eigen::VectorXd eta_;
  Eigen::VectorXd s0_;
  Eigen::MatrixXd s1_;
  Eigen::MatrixXd s2_;  // column k holds s2[k] in column-major order
};

// One backward pass with compensated summation. Throws NumericError when
// beta'Z_j - log_scale exceeds kMaxExponent, std::invalid_argument on a
// dimension mismatch.
RiskAggregates build_aggregates(const SurvivalDataset& data, const Eigen::VectorXd& beta);
RiskAggregates build_aggregates(const SurvivalDataset& data, std::shared_ptr<const RiskSetIndex> index,
                                const Eigen::VectorXd& beta, double log_scale = 0.0);

// Phi_n(beta, x) = (1/n) sum_{T_j >= x} exp(beta'Z_j). Left-continuous and
// nonincreasing; zero past the largest follow-up time.
double phi_n(const RiskAggregates& agg, double x);
// D_n^(1)(beta, x), the beta-gradient of phi_n.
Eigen::VectorXd d1_n(const RiskAggregates& agg, double x);
// D_n^(2)(beta, x), the beta-Hessian of phi_n.
Eigen::MatrixXd d2_n(const RiskAggregates& agg, double x);

}  // namespace coxlin

#endif  // COXLIN_RISK_ENGINE_HPP_
