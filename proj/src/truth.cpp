#include "coxlin/truth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "coxlin/quadrature.hpp"

namespace coxlin {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr int kNormalPanels = 32;

int law_dimension(const CovariateLaw& law) {
  return std::visit(Overloaded{
                        [](const NoCovariate&) { return 0; },
                        [](const BernoulliCovariate&) { return 1; },
                        [](const DiscreteCovariate& d) {
                          if (d.points.empty()) throw std::invalid_argument("discrete covariate law has no points");
                          return static_cast<int>(d.points.front().size());
                        },
                        [](const TruncatedNormalCovariate&) { return 1; },
                    },
                    law);
}

std::vector<std::pair<double, Eigen::VectorXd>> support_of(const CovariateLaw& law) {
  using Support = std::vector<std::pair<double, Eigen::VectorXd>>;
  return std::visit(
      Overloaded{
          [](const NoCovariate&) { return Support{{1.0, Eigen::VectorXd()}}; },
          [](const BernoulliCovariate& b) {
            if (!(b.q >= 0.0 && b.q <= 1.0)) throw std::invalid_argument("Bernoulli probability outside [0, 1]");
            return Support{{1.0 - b.q, Eigen::VectorXd::Zero(1)}, {b.q, Eigen::VectorXd::Ones(1)}};
          },
          [](const DiscreteCovariate& d) {
            if (d.points.size() != d.probabilities.size()) {
              throw std::invalid_argument("discrete covariate law: points and probabilities differ in length");
            }
            const double total = std::accumulate(d.probabilities.begin(), d.probabilities.end(), 0.0);
            if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete probabilities must sum to 1");
            Support s;
            for (std::size_t j = 0; j < d.points.size(); ++j) {
              if (d.probabilities[j] < 0.0) throw std::invalid_argument("negative discrete probability");
              if (d.points[j].size() != d.points.front().size()) {
                throw std::invalid_argument("discrete support points differ in dimension");
              }
              s.emplace_back(d.probabilities[j], d.points[j]);
            }
            return s;
          },
          [](const TruncatedNormalCovariate& t) {
            if (!(t.sd > 0.0) || !(t.upper > t.lower) || !std::isfinite(t.lower) || !std::isfinite(t.upper)) {
              throw std::invalid_argument("truncated normal needs sd > 0 and finite bounds lower < upper");
            }
            using Rule = boost::math::quadrature::gauss<double, 20>;
            Support s;
            const double width = (t.upper - t.lower) / kNormalPanels;
            double total = 0.0;
            for (int panel = 0; panel < kNormalPanels; ++panel) {
              const double mid = t.lower + (panel + 0.5) * width;
              for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
                for (double sign : {-1.0, 1.0}) {
                  const double z = mid + sign * 0.5 * width * Rule::abscissa()[i];
                  const double u = (z - t.mean) / t.sd;
                  const double w = 0.5 * width * Rule::weights()[i] * std::exp(-0.5 * u * u);
                  total += w;
                  s.emplace_back(w, Eigen::VectorXd::Constant(1, z));
                }
              }
            }
            for (auto& node : s) node.first /= total;
            return s;
          },
      },
      law);
}

}  // namespace

double WeibullBaseline::hazard(double x) const {
  if (x <= 0.0) return shape == 1.0 ? 1.0 / scale : (shape < 1.0 ? INFINITY : 0.0);
  return (shape / scale) * std::pow(x / scale, shape - 1.0);
}

double WeibullBaseline::cumulative(double x) const {
  if (x <= 0.0) return 0.0;
  return std::pow(x / scale, shape);
}

double WeibullBaseline::inverse_cumulative(double y) const {
  if (y <= 0.0) return 0.0;
  return scale * std::pow(y, 1.0 / shape);
}

TruthModel::TruthModel(std::string name, Eigen::VectorXd beta0, WeibullBaseline baseline, CovariateLaw law,
                       double censoring_horizon)
    : name_(std::move(name)),
      beta0_(std::move(beta0)),
      baseline_(baseline),
      law_(std::move(law)),
      horizon_(censoring_horizon) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw std::invalid_argument("censoring horizon must be positive");
  if (!(baseline_.shape > 0.0) || !(baseline_.scale > 0.0)) {
    throw std::invalid_argument("Weibull shape and scale must be positive");
  }
  if (law_dimension(law_) != beta0_.size()) {
    throw std::invalid_argument("beta0 dimension does not match the covariate law");
  }
  for (auto& [w, z] : support_of(law_)) {
    const double eta = beta0_.size() == 0 ? 0.0 : beta0_.dot(z);
    rule_.push_back({w, z, std::exp(eta)});
  }
  if (!std::isfinite(second_exponential_moment(beta0_))) {
    throw std::invalid_argument("E[|Z|^2 exp(2 beta0'Z)] is not finite");
  }
}

double TruthModel::censoring_survival(double x) const {
  if (x <= 0.0) return 1.0;
  return std::max(0.0, 1.0 - x / horizon_);
}

double TruthModel::censoring_density(double x) const { return (x >= 0.0 && x <= horizon_) ? 1.0 / horizon_ : 0.0; }

double TruthModel::phi(double x) const {
  const double sc = censoring_survival(x);
  if (sc == 0.0) return 0.0;
  const double cum = cumulative_baseline_hazard(x);
  double sum = 0.0;
  for (const Node& node : rule_) sum += node.weight * node.risk * std::exp(-cum * node.risk);
  return sum * sc;
}

Eigen::VectorXd TruthModel::d1(double x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(covariate_dim());
  const double sc = censoring_survival(x);
  if (sc == 0.0) return out;
  const double cum = cumulative_baseline_hazard(x);
  for (const Node& node : rule_) out += (node.weight * node.risk * std::exp(-cum * node.risk)) * node.z;
  return out * sc;
}

double TruthModel::survival(double x) const {
  const double sc = censoring_survival(x);
  if (sc == 0.0) return 0.0;
  const double cum = cumulative_baseline_hazard(x);
  double sum = 0.0;
  for (const Node& node : rule_) sum += node.weight * std::exp(-cum * node.risk);
  return sum * sc;
}

double TruthModel::sub_distribution_uncensored(double x) const {
  const double upper = std::min(x, horizon_);
  return integrate([this](double u) { return baseline_hazard(u) * phi(u); }, 0.0, upper);
}

double TruthModel::second_exponential_moment(const Eigen::VectorXd& beta) const {
  double sum = 0.0;
  for (const Node& node : rule_) {
    const double eta = beta.size() == 0 ? 0.0 : beta.dot(node.z);
    sum += node.weight * node.z.squaredNorm() * std::exp(2.0 * eta);
  }
  return sum;
}

double TruthModel::upper_limit(double threshold) const {
  if (phi(0.0) < threshold) {
    throw std::invalid_argument("Phi(beta0, 0) is already below the threshold " + std::to_string(threshold));
  }
  double lo = 0.0, hi = horizon_;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * horizon_; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) >= threshold ? lo : hi) = mid;
  }
  return lo;
}

Eigen::VectorXd TruthModel::draw_covariate(Rng& rng) const {
  return std::visit(Overloaded{
                        [](const NoCovariate&) -> Eigen::VectorXd { return Eigen::VectorXd(); },
                        [&](const BernoulliCovariate& b) -> Eigen::VectorXd {
                          return Eigen::VectorXd::Constant(1, rng.uniform() < b.q ? 1.0 : 0.0);
                        },
                        [&](const DiscreteCovariate& d) -> Eigen::VectorXd {
                          const double u = rng.uniform();
                          double cumulative = 0.0;
                          for (std::size_t j = 0; j < d.points.size(); ++j) {
                            cumulative += d.probabilities[j];
                            if (u < cumulative) return d.points[j];
                          }
                          return d.points.back();
                        },
                        [&](const TruncatedNormalCovariate& t) -> Eigen::VectorXd {
                          const boost::math::normal_distribution<double> std_normal;
                          const double lo = boost::math::cdf(std_normal, (t.lower - t.mean) / t.sd);
                          const double hi = boost::math::cdf(std_normal, (t.upper - t.mean) / t.sd);
                          const double p = lo + rng.uniform() * (hi - lo);
                          const double z = t.mean + t.sd * boost::math::quantile(std_normal, p);
                          return Eigen::VectorXd::Constant(1, std::clamp(z, t.lower, t.upper));
                        },
                    },
                    law_);
}

TruthModel reference_truth() {
  return TruthModel("reference", Eigen::VectorXd::Constant(1, std::log(2.0)), WeibullBaseline{1.0, 1.0},
                    BernoulliCovariate{0.5}, 3.0);
}

TruthModel truth_by_name(const std::string& name) {
  if (name == "reference") return reference_truth();
  if (name == "reference-nocov") {
    return TruthModel(name, Eigen::VectorXd(), WeibullBaseline{1.0, 1.0}, NoCovariate{}, 3.0);
  }
  if (name == "weibull-truncnormal") {
    return TruthModel(name, Eigen::VectorXd::Constant(1, 0.5), WeibullBaseline{1.5, 1.0},
                      TruncatedNormalCovariate{0.0, 1.0, -2.0, 2.0}, 2.0);
  }
  if (name == "discrete-2d") {
    Eigen::VectorXd beta(2);
    beta << 0.5, -0.3;
    DiscreteCovariate law;
    for (double a : {0.0, 1.0}) {
      for (double b : {0.0, 1.0}) {
        Eigen::VectorXd z(2);
        z << a, b;
        law.points.push_back(z);
        law.probabilities.push_back(0.25);
      }
    }
    return TruthModel(name, beta, WeibullBaseline{1.0, 1.0}, law, 3.0);
  }
  throw std::invalid_argument("unknown truth model '" + name + "'");
}

std::vector<std::string> truth_names() { return {"reference", "reference-nocov", "weibull-truncnormal", "discrete-2d"}; }

SurvivalDataset generate_dataset(const TruthModel& truth, int n, std::uint64_t seed) {
  Rng rng(seed);
  return generate_dataset(truth, n, rng);
}

SurvivalDataset generate_dataset(const TruthModel& truth, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample size must be at least 1");
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(n));
  const int p = truth.covariate_dim();
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.covariates = truth.draw_covariate(rng);
    const double eta = p == 0 ? 0.0 : truth.beta0().dot(o.covariates);
    const double x = truth.baseline().inverse_cumulative(-std::log(rng.uniform()) / std::exp(eta));
    const double c = truth.censoring_horizon() * rng.uniform();
    o.time = std::min(x, c);
    o.event = x <= c;
    obs.push_back(std::move(o));
  }
  return SurvivalDataset(std::move(obs), p);
}

}  // namespace coxlin
