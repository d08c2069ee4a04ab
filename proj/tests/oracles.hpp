// Independent reference implementations used to check the library. Nothing
// here calls into the code under test except for data types.
#ifndef COXLIN_TESTS_ORACLES_HPP_
#define COXLIN_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "coxlin/dataset.hpp"

namespace oracle {

using coxlin::Observation;
using coxlin::SurvivalDataset;

inline Observation obs(double t, bool event, std::vector<double> z = {}) {
  Observation o;
  o.time = t;
  o.event = event;
  o.covariates = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  return o;
}

// {(1,1,z=1), (2,1,z=0), (3,1,z=1)}
inline SurvivalDataset three_point() {
  return SurvivalDataset({obs(1, true, {1}), obs(2, true, {0}), obs(3, true, {1})}, 1);
}

// Random data with heavy ties: times on a coarse lattice, covariates in
// [-1, 1], about 70% events; at least one event guaranteed.
inline SurvivalDataset random_dataset(std::mt19937_64& gen, int n, int p, int lattice = 0) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (lattice <= 0) lattice = std::max(2, n / 3);
  std::vector<Observation> rows;
  bool any_event = false;
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.time = (1 + static_cast<int>(unif(gen) * lattice)) * 0.25;
    o.event = unif(gen) < 0.7;
    any_event = any_event || o.event;
    o.covariates.resize(p);
    for (int j = 0; j < p; ++j) o.covariates[j] = 2.0 * unif(gen) - 1.0;
    rows.push_back(o);
  }
  if (!any_event) rows.front().event = true;
  return SurvivalDataset(std::move(rows), p);
}

inline Eigen::VectorXd random_beta(std::mt19937_64& gen, int p, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Eigen::VectorXd b(p);
  for (int j = 0; j < p; ++j) b[j] = unif(gen);
  return b;
}

inline double risk(const Observation& o, const Eigen::VectorXd& beta) {
  return beta.size() == 0 ? 1.0 : std::exp(beta.dot(o.covariates));
}

// (1/n) sum_{T_j >= x} exp(beta'Z_j) by direct summation.
inline double phi_n(const SurvivalDataset& d, const Eigen::VectorXd& beta, double x) {
  double s = 0.0;
  for (const auto& o : d.observations()) {
    if (o.time >= x) s += risk(o, beta);
  }
  return s / d.size();
}

// Direct O(n^2) log partial likelihood with Breslow ties.
inline double loglik(const SurvivalDataset& d, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (const auto& o : d.observations()) {
    if (!o.event) continue;
    double denom = 0.0;
    for (const auto& q : d.observations()) {
      if (q.time >= o.time) denom += risk(q, beta);
    }
    ll += beta.dot(o.covariates) - std::log(denom);
  }
  return ll;
}

// Direct O(n^2) Breslow curve as (time -> value) at distinct event times.
inline std::map<double, double> breslow(const SurvivalDataset& d, const Eigen::VectorXd& beta) {
  std::map<double, int> deaths;
  for (const auto& o : d.observations()) {
    if (o.event) ++deaths[o.time];
  }
  std::map<double, double> out;
  double cum = 0.0;
  for (const auto& [t, k] : deaths) {
    double denom = 0.0;
    for (const auto& q : d.observations()) {
      if (q.time >= t) denom += risk(q, beta);
    }
    cum += k / denom;
    out[t] = cum;
  }
  return out;
}

// Nelson-Aalen from counts: sum over event times of d(t) / #{T >= t}, with
// the at-risk count updated by subtraction as time advances.
inline std::map<double, double> nelson_aalen(const SurvivalDataset& d) {
  std::map<double, std::pair<int, int>> table;  // time -> (events, leaving)
  for (const auto& o : d.observations()) {
    auto& cell = table[o.time];
    cell.first += o.event ? 1 : 0;
    cell.second += 1;
  }
  int at_risk = d.size();
  double cum = 0.0;
  std::map<double, double> out;
  for (const auto& [t, cell] : table) {
    if (cell.first > 0) {
      cum += static_cast<double>(cell.first) / static_cast<double>(at_risk);
      out[t] = cum;
    }
    at_risk -= cell.second;
  }
  return out;
}

// Central difference of a scalar function of beta along each coordinate.
inline Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& at,
                                double h) {
  Eigen::VectorXd g(at.size());
  for (Eigen::Index j = 0; j < at.size(); ++j) {
    Eigen::VectorXd up = at, down = at;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

inline Eigen::MatrixXd hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& at,
                               double h) {
  const auto p = at.size();
  Eigen::MatrixXd H(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      const auto shifted = [&](double da, double db) {
        Eigen::VectorXd v = at;
        v[a] += da;
        v[b] += db;
        return f(v);
      };
      H(a, b) = (shifted(h, h) - shifted(h, -h) - shifted(-h, h) + shifted(-h, -h)) / (4.0 * h * h);
    }
  }
  return H;
}

// Composite Simpson rule with a fixed number of panels; deliberately a
// different scheme from the library's adaptive Gauss-Kronrod driver.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 2000) {
  if (!(b > a)) return 0.0;
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Closed forms of the reference design: Z ~ Bernoulli(1/2), beta0 = ln 2,
// unit exponential baseline, C ~ Uniform(0, 3).
namespace reference {

inline double censor_survival(double x) { return x >= 3.0 ? 0.0 : 1.0 - x / 3.0; }
inline double phi(double x) { return 0.5 * censor_survival(x) * (std::exp(-x) + 2.0 * std::exp(-2.0 * x)); }
inline double d1(double x) { return 0.5 * censor_survival(x) * 2.0 * std::exp(-2.0 * x); }

// int_0^x 1/phi(u) du by Simpson.
inline double k_integral(double x, int panels = 4000) {
  return simpson([](double u) { return 1.0 / phi(u); }, 0.0, x, panels);
}

}  // namespace reference

}  // namespace oracle

#endif  // COXLIN_TESTS_ORACLES_HPP_
