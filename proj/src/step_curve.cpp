#include "coxlin/step_curve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace coxlin {

StepCurve::StepCurve(std::vector<double> jump_times, std::vector<double> values, double value_before_first)
    : jump_times_(std::move(jump_times)), values_(std::move(values)), value_before_first_(value_before_first) {
  if (jump_times_.size() != values_.size()) {
    throw std::invalid_argument("StepCurve: jump_times and values differ in length");
  }
  for (std::size_t k = 0; k < jump_times_.size(); ++k) {
    if (!std::isfinite(jump_times_[k]) || !std::isfinite(values_[k])) {
      throw std::invalid_argument("StepCurve: non-finite jump time or value");
    }
    if (k > 0 && !(jump_times_[k] > jump_times_[k - 1])) {
      throw std::invalid_argument("StepCurve: jump times must be strictly increasing");
    }
  }
}

StepCurve StepCurve::nondecreasing(std::vector<double> jump_times, std::vector<double> values,
                                   double value_before_first) {
  StepCurve c(std::move(jump_times), std::move(values), value_before_first);
  double prev = value_before_first;
  for (double v : c.values_) {
    if (v < prev) throw std::invalid_argument("StepCurve: values must be nondecreasing");
    prev = v;
  }
  return c;
}

double StepCurve::operator()(double x) const {
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), x);
  if (it == jump_times_.begin()) return value_before_first_;
  return values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

double StepCurve::increment(std::size_t k) const {
  return k == 0 ? values_[0] - value_before_first_ : values_[k] - values_[k - 1];
}

}  // namespace coxlin
