#ifndef COXLIN_STEP_CURVE_HPP_
#define COXLIN_STEP_CURVE_HPP_

#include <vector>

namespace coxlin {

// A right-continuous step function: the value at x is values[k] for the
// largest k with jump_times[k] <= x, and value_before_first when x lies
// before every jump. Jump times are strictly increasing.
//
// Cumulative hazards are built with nondecreasing(); coordinates of the
// A_n curve may decrease (negative covariates) and use the plain
// constructor.
class StepCurve {
 public:
  StepCurve() = default;
  StepCurve(std::vector<double> jump_times, std::vector<double> values, double value_before_first = 0.0);

  // Additionally requires values to be nondecreasing and to start at or
  // above value_before_first.
  static StepCurve nondecreasing(std::vector<double> jump_times, std::vector<double> values,
                                 double value_before_first = 0.0);

  double operator()(double x) const;

  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<double>& values() const { return values_; }
  double value_before_first() const { return value_before_first_; }
  bool empty() const { return jump_times_.empty(); }
  std::size_t size() const { return jump_times_.size(); }

  // Size of the jump at jump_times()[k].
  double increment(std::size_t k) const;

 private:
  std::vector<double> jump_times_;
  std::vector<double> values_;
  double value_before_first_ = 0.0;
};

}  // namespace coxlin

#endif  // COXLIN_STEP_CURVE_HPP_
