#ifndef COXLIN_TRUTH_HPP_
#define COXLIN_TRUTH_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "coxlin/dataset.hpp"
#include "coxlin/random.hpp"

namespace coxlin {

// Covariate laws. Bernoulli and truncated normal are scalar (p = 1); the
// discrete law has support points in R^p; NoCovariate gives p = 0.
struct NoCovariate {};
struct BernoulliCovariate {
  double q = 0.5;
};
struct DiscreteCovariate {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> probabilities;
};
struct TruncatedNormalCovariate {
  double mean = 0.0;
  double sd = 1.0;
  double lower = -2.0;
  double upper = 2.0;
};
using CovariateLaw = std::variant<NoCovariate, BernoulliCovariate, DiscreteCovariate, TruncatedNormalCovariate>;

// lambda_0(x) = (shape/scale) (x/scale)^(shape-1), Lambda_0(x) = (x/scale)^shape.
// shape = scale = 1 is the unit exponential.
struct WeibullBaseline {
  double shape = 1.0;
  double scale = 1.0;

  double hazard(double x) const;
  double cumulative(double x) const;
  double inverse_cumulative(double y) const;
};

// A Cox data-generating design: hazard lambda_0(x) exp(beta0'z), covariates
// from `law`, censoring C ~ Uniform(0, censoring_horizon). Since the Weibull
// baseline has unbounded support, tau_H = tau_G = censoring_horizon < tau_F.
//
// Expectations over Z use an exact support for discrete laws and a composite
// Gauss-Legendre rule (normalized to total mass one) for the truncated normal.
class TruthModel {
 public:
  struct Node {
    double weight;
    Eigen::VectorXd z;
    double risk;  // exp(beta0'z)
  };

  TruthModel(std::string name, Eigen::VectorXd beta0, WeibullBaseline baseline, CovariateLaw law,
             double censoring_horizon);

  const std::string& name() const { return name_; }
  const Eigen::VectorXd& beta0() const { return beta0_; }
  int covariate_dim() const { return static_cast<int>(beta0_.size()); }
  const WeibullBaseline& baseline() const { return baseline_; }
  const CovariateLaw& law() const { return law_; }
  double censoring_horizon() const { return horizon_; }
  const std::vector<Node>& covariate_rule() const { return rule_; }

  double baseline_hazard(double x) const { return baseline_.hazard(x); }
  double cumulative_baseline_hazard(double x) const { return baseline_.cumulative(x); }

  double censoring_survival(double x) const;  // P(C >= x)
  double censoring_density(double x) const;

  // Phi(beta0, x) = E[{T >= x} exp(beta0'Z)].
  double phi(double x) const;
  // D^(1)(beta0, x) = E[{T >= x} Z exp(beta0'Z)].
  Eigen::VectorXd d1(double x) const;
  // P(T >= x) = 1 - H(x) (T is continuous).
  double survival(double x) const;
  // H^uc(x) = P(T <= x, Delta = 1) = int_0^x lambda_0(u) Phi(beta0, u) du.
  double sub_distribution_uncensored(double x) const;
  double event_probability() const { return sub_distribution_uncensored(horizon_); }

  // E[|Z|^2 exp(2 beta'Z)] at the given beta.
  double second_exponential_moment(const Eigen::VectorXd& beta) const;

  // Largest M in [0, tau_H) with Phi(beta0, M) >= threshold (bisection).
  double upper_limit(double threshold = 0.05) const;

  // Consumes exactly one uniform unless the law is NoCovariate.
  Eigen::VectorXd draw_covariate(Rng& rng) const;

 private:
  std::string name_;
  Eigen::VectorXd beta0_;
  WeibullBaseline baseline_;
  CovariateLaw law_;
  double horizon_;
  std::vector<Node> rule_;
};

// Z ~ Bernoulli(1/2), beta0 = ln 2, lambda_0 = 1, C ~ Uniform(0, 3).
TruthModel reference_truth();

// Known names: "reference", "reference-nocov" (p = 0, otherwise as the
// reference), "weibull-truncnormal" (p = 1), "discrete-2d" (p = 2).
TruthModel truth_by_name(const std::string& name);
std::vector<std::string> truth_names();

// For each subject, in order: the covariate draw, u for X, v for C; then
// X = Lambda_0^{-1}(-log(u) / exp(beta0'Z)), C = tau * v. Throws DataError in
// the unlikely event that no event is drawn.
SurvivalDataset generate_dataset(const TruthModel& truth, int n, std::uint64_t seed);
SurvivalDataset generate_dataset(const TruthModel& truth, int n, Rng& rng);

}  // namespace coxlin

#endif  // COXLIN_TRUTH_HPP_
