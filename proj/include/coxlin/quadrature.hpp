#ifndef COXLIN_QUADRATURE_HPP_
#define COXLIN_QUADRATURE_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace coxlin {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kQuadratureTolerance = 1e-10;

namespace detail {

// One 15-point Kronrod / 7-point Gauss pair on [a, b]; returns the Kronrod
// value and |Kronrod - Gauss|. The Gauss nodes are the even-indexed Kronrod
// abscissae.
template <class F>
std::pair<double, double> gauss_kronrod_15(F& f, double a, double b) {
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
  using Gauss = boost::math::quadrature::gauss<double, 7>;
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f0 = f(mid);
  double kronrod = wk[0] * f0;
  double gauss = wg[0] * f0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double pair = f(mid - half * x[i]) + f(mid + half * x[i]);
    kronrod += wk[i] * pair;
    if (i % 2 == 0) gauss += wg[i / 2] * pair;
  }
  return {half * kronrod, half * std::abs(kronrod - gauss)};
}

template <class F>
double adaptive(F& f, double a, double b, double abs_tol, int depth, double& error) {
  const auto [value, err] = gauss_kronrod_15(f, a, b);
  if (err <= abs_tol || err <= 1e-14 * std::abs(value) || depth == 0) {
    error += err;
    return value;
  }
  const double mid = 0.5 * (a + b);
  return adaptive(f, a, mid, 0.5 * abs_tol, depth - 1, error) + adaptive(f, mid, b, 0.5 * abs_tol, depth - 1, error);
}

}  // namespace detail

// Adaptive Gauss-Kronrod (15/7) on [a, b] with bisection. Throws
// QuadratureError when the accumulated error estimate exceeds abs_tol.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = kQuadratureTolerance) {
  if (!(b > a)) return 0.0;
  double error = 0.0;
  const double value = detail::adaptive(f, a, b, abs_tol, 30, error);
  if (!std::isfinite(value) || error > std::max(abs_tol, 1e-13 * std::abs(value))) {
    throw QuadratureError("quadrature on [" + std::to_string(a) + ", " + std::to_string(b) +
                          "] did not converge (error estimate " + std::to_string(error) + ")");
  }
  return value;
}

}  // namespace coxlin

#endif  // COXLIN_QUADRATURE_HPP_
