#ifndef COXLIN_RATE_LAB_HPP_
#define COXLIN_RATE_LAB_HPP_

#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coxlin {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Claim { lemma1, lemma2, theorem };
std::string_view to_string(Claim claim);
Claim parse_claim(std::string_view text);

// Normalizing sequence a_n in the boundedness statistic a_n * n * sup|.|.
enum class ANChoice { inv_log, inv_log_log };
std::string_view to_string(ANChoice choice);
ANChoice parse_a_n(std::string_view text);
double a_n_value(ANChoice choice, int n);

// Upper end M of the evaluation interval [0, M]:
//   truth  - M with Phi(beta0, M) = 0.05, computed once from the truth model
//   plugin - per dataset, the last follow-up time with Phi_n >= 0.05
//   fixed  - a given number
struct MPolicy {
  enum class Kind { truth, plugin, fixed };
  Kind kind = Kind::truth;
  double value = 0.0;

  std::string describe() const;
  static MPolicy parse(std::string_view text);
};

struct ExperimentConfig {
  Claim claim = Claim::theorem;
  std::string truth = "reference";
  std::vector<int> sample_sizes{250, 500, 1000, 2000, 4000, 8000};
  int replications = 200;
  ANChoice a_n = ANChoice::inv_log;
  std::uint64_t seed = 1;
  int grid_points = 512;
  MPolicy m_policy;
  bool force_beta0 = false;  // theorem only: use beta0 in place of beta-hat
  int threads = 0;           // 0 = hardware concurrency; never affects results

  // Throws ConfigError on an invalid combination.
  void validate() const;
};

// Flat "key = value" lines; '#' starts a comment. Keys: truth, sample_sizes
// (comma separated), replications, a_n, seed, grid_points, M_policy, claim.
// Keys not present keep the values of `base`.
ExperimentConfig parse_experiment_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base = {});

std::vector<int> parse_int_list(std::string_view text);

struct Summary {
  int count = 0;
  double mean = 0, sd = 0, median = 0, q05 = 0, q25 = 0, q75 = 0, q95 = 0;
};

// Linear-interpolation quantiles (type 7) of the finite values.
Summary summarize(std::vector<double> values);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double standard_error = 0.0;  // NaN with fewer than three points
};

// Least squares of log y on log x.
SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

struct TrackedQuantity {
  std::string name;
  std::vector<std::vector<double>> samples;  // [size index][replication], NaN if excluded
  std::vector<Summary> per_n;
  SlopeFit slope;  // on (log n, log mean)
};

struct RateExperimentResult {
  ExperimentConfig config;
  std::vector<double> upper_limits;      // mean M used per sample size
  std::vector<TrackedQuantity> quantities;  // the first is the primary one
  std::vector<int> excluded;             // per sample size
  // Normalized primary quantity, sqrt(n) * sup for lemma1 and a_n * n * sup
  // otherwise: median per n and the ratio of its largest to smallest value.
  std::vector<double> normalized_median;
  double normalized_ratio = 0.0;
  bool span_warning = false;  // sample sizes cover less than 1.5 decades
  bool valid = true;          // false when exclusions exceed 1% at some n
  std::string invalid_reason;

  const TrackedQuantity& primary() const { return quantities.front(); }
  const TrackedQuantity& quantity(std::string_view name) const;
  double fitted_slope() const { return primary().slope.slope; }
};

// Replication r at size index j draws from substream (j << 32) | r of the
// seed. Tracked quantities, primary first:
//   lemma1:  sup_phi, sup_d1 (absent for p = 0)
//   lemma2:  sup_r_n3, sup_r_n4
//   theorem: sup_r_n, sup_mean_xi, beta_error (|beta-hat - beta0|)
// Sup norms are taken over grid_points equispaced values on [0, M] plus the
// jump points inside it.
RateExperimentResult run_experiment(const ExperimentConfig& config);

RateExperimentResult lemma1_experiment(ExperimentConfig config);
RateExperimentResult lemma2_experiment(ExperimentConfig config);
RateExperimentResult theorem_rate_experiment(ExperimentConfig config);

}  // namespace coxlin

#endif  // COXLIN_RATE_LAB_HPP_
