#include "coxlin/risk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace coxlin {

RiskSetIndex RiskSetIndex::build(const SurvivalDataset& data) {
  const int n = data.size();
  RiskSetIndex idx;
  idx.order.resize(static_cast<std::size_t>(n));
  std::iota(idx.order.begin(), idx.order.end(), 0);
  std::stable_sort(idx.order.begin(), idx.order.end(),
                   [&](int a, int b) { return data[a].time < data[b].time; });
  idx.time_index.assign(static_cast<std::size_t>(n), 0);
  for (int r = 0; r < n; ++r) {
    const int i = idx.order[static_cast<std::size_t>(r)];
    const double t = data[i].time;
    if (idx.distinct_times.empty() || t != idx.distinct_times.back()) {
      idx.distinct_times.push_back(t);
      idx.group_start.push_back(r);
      idx.event_counts.push_back(0);
    }
    if (data[i].event) ++idx.event_counts.back();
    idx.time_index[static_cast<std::size_t>(i)] = idx.groups() - 1;
  }
  idx.group_start.push_back(n);
  return idx;
}

int RiskSetIndex::first_at_or_after(double x) const {
  return static_cast<int>(std::lower_bound(distinct_times.begin(), distinct_times.end(), x) -
                          distinct_times.begin());
}

Eigen::Map<const Eigen::MatrixXd> RiskAggregates::s2(int k) const {
  const int p = covariate_dim();
  return Eigen::Map<const Eigen::MatrixXd>(s2_.col(k).data(), p, p);
}

RiskAggregates build_aggregates(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  return build_aggregates(data, std::make_shared<const RiskSetIndex>(RiskSetIndex::build(data)), beta, 0.0);
}

RiskAggregates build_aggregates(const SurvivalDataset& data, std::shared_ptr<const RiskSetIndex> index,
                                const Eigen::VectorXd& beta, double log_scale) {
  const int p = data.covariate_dim();
  const int n = data.size();
  if (beta.size() != p) {
    throw std::invalid_argument("build_aggregates: beta has length " + std::to_string(beta.size()) +
                                " but the dataset has " + std::to_string(p) + " covariates");
  }
  RiskAggregates agg;
  agg.beta_ = beta;
  agg.n_ = n;
  agg.log_scale_ = log_scale;
  agg.index_ = std::move(index);
  const RiskSetIndex& idx = *agg.index_;
  const int groups = idx.groups();

  agg.eta_.resize(n);
  Eigen::VectorXd weight(n);
  for (int i = 0; i < n; ++i) {
    const double eta = p == 0 ? 0.0 : beta.dot(data[i].covariates);
    const double shifted = eta - log_scale;
    if (!std::isfinite(eta) || shifted > kMaxExponent) {
      std::ostringstream os;
      os << "exp(beta'Z) overflows for row " << (i + 1) << ": beta'Z = " << eta;
      throw NumericError(os.str());
    }
    agg.eta_[i] = eta;
    weight[i] = std::exp(shifted);
  }

  agg.s0_.resize(groups);
  agg.s1_.resize(p, groups);
  agg.s2_.resize(p * p, groups);

  // Kahan-compensated running sums, accumulated from the latest time down.
  double sum0 = 0.0, comp0 = 0.0;
  Eigen::VectorXd sum1 = Eigen::VectorXd::Zero(p), comp1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(p, p), comp2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd y1(p), t1(p);
  Eigen::MatrixXd y2(p, p), t2(p, p);

  for (int k = groups - 1; k >= 0; --k) {
    for (int r = idx.group_start[static_cast<std::size_t>(k)]; r < idx.group_start[static_cast<std::size_t>(k) + 1];
         ++r) {
      const int i = idx.order[static_cast<std::size_t>(r)];
      const double w = weight[i];
      const double y0 = w - comp0;
      const double t0 = sum0 + y0;
      comp0 = (t0 - sum0) - y0;
      sum0 = t0;
      if (p > 0) {
        const Eigen::VectorXd& z = data[i].covariates;
        y1 = w * z - comp1;
        t1 = sum1 + y1;
        comp1 = (t1 - sum1) - y1;
        sum1 = t1;
        y2.noalias() = w * z * z.transpose();
        y2 -= comp2;
        t2 = sum2 + y2;
        comp2 = (t2 - sum2) - y2;
        sum2 = t2;
      }
    }
    agg.s0_[k] = sum0;
    if (p > 0) {
      agg.s1_.col(k) = sum1;
      Eigen::MatrixXd sym = sum2.triangularView<Eigen::Upper>();
      sym.triangularView<Eigen::StrictlyLower>() = sum2.transpose().triangularView<Eigen::StrictlyLower>();
      agg.s2_.col(k) = Eigen::Map<const Eigen::VectorXd>(sym.data(), p * p);
    }
  }
  return agg;
}

double phi_n(const RiskAggregates& agg, double x) {
  const int k = agg.index().first_at_or_after(x);
  if (k == agg.groups()) return 0.0;
  return std::exp(agg.log_scale()) * agg.s0(k) / agg.n();
}

Eigen::VectorXd d1_n(const RiskAggregates& agg, double x) {
  const int k = agg.index().first_at_or_after(x);
  if (k == agg.groups()) return Eigen::VectorXd::Zero(agg.covariate_dim());
  return (std::exp(agg.log_scale()) / agg.n()) * agg.s1(k);
}

Eigen::MatrixXd d2_n(const RiskAggregates& agg, double x) {
  const int p = agg.covariate_dim();
  const int k = agg.index().first_at_or_after(x);
  if (k == agg.groups()) return Eigen::MatrixXd::Zero(p, p);
  return (std::exp(agg.log_scale()) / agg.n()) * agg.s2(k);
}

}  // namespace coxlin
