#ifndef COXLIN_DATASET_HPP_
#define COXLIN_DATASET_HPP_

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coxlin {

// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One right-censored triplet: follow-up time T = min(X, C), the event
// indicator {X <= C}, and a time-invariant covariate vector.
struct Observation {
  double time = 0.0;
  bool event = false;
  Eigen::VectorXd covariates;
};

// Unvalidated row as it comes out of a parser or a generator.
struct RawObservation {
  double time;
  bool event;
  std::vector<double> covariates;
};

// An immutable, validated sample of n >= 1 observations sharing the same
// covariate dimension p (p = 0 is allowed) with at least one event.
// Tied follow-up times are kept as-is; row order is preserved.
class SurvivalDataset {
 public:
  // Throws DataError if any invariant is violated.
  SurvivalDataset(std::vector<Observation> observations, int covariate_dim);

  int size() const { return static_cast<int>(observations_.size()); }
  int covariate_dim() const { return covariate_dim_; }
  const std::vector<Observation>& observations() const { return observations_; }
  const Observation& operator[](int i) const { return observations_[static_cast<std::size_t>(i)]; }

  int event_count() const;
  double max_time() const;

 private:
  std::vector<Observation> observations_;
  int covariate_dim_;
};

// Validates raw rows; the covariate dimension is taken from the first row.
SurvivalDataset validate_dataset(const std::vector<RawObservation>& raw);

// Reads `time,event,z1,...,zp` CSV. Errors name the 1-based data row.
SurvivalDataset load_csv(const std::filesystem::path& path);
SurvivalDataset parse_csv(std::istream& in);

// Writes the same format with 17 significant digits, so that load_csv
// recovers every value exactly.
void write_csv(const SurvivalDataset& data, std::ostream& out);
void write_csv(const SurvivalDataset& data, const std::filesystem::path& path);

}  // namespace coxlin

#endif  // COXLIN_DATASET_HPP_
