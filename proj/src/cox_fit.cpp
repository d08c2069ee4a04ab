#include "coxlin/cox_fit.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "coxlin/risk_engine.hpp"

namespace coxlin {

namespace {

constexpr double kStabilizeAbove = 700.0;

void require_covariates(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  if (data.covariate_dim() == 0) throw ModelError("partial likelihood needs at least one covariate (p = 0)");
  if (beta.size() != data.covariate_dim()) {
    throw std::invalid_argument("beta has length " + std::to_string(beta.size()) + " but the dataset has " +
                                std::to_string(data.covariate_dim()) + " covariates");
  }
}

double stabilizing_shift(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  double max_eta = -std::numeric_limits<double>::infinity();
  for (const auto& o : data.observations()) max_eta = std::max(max_eta, beta.dot(o.covariates));
  if (!std::isfinite(max_eta)) {
    throw NumericError("beta'Z is not finite");
  }
  return max_eta > kStabilizeAbove ? max_eta : 0.0;
}

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

// Evaluates the partial likelihood and its derivatives on a fixed time index.
class PartialLikelihood {
 public:
  explicit PartialLikelihood(const SurvivalDataset& data)
      : data_(data), index_(std::make_shared<const RiskSetIndex>(RiskSetIndex::build(data))) {
    const int p = data.covariate_dim();
    event_sums_ = Eigen::MatrixXd::Zero(p, index_->groups());
    for (int i = 0; i < data.size(); ++i) {
      if (data[i].event) event_sums_.col(index_->time_index[static_cast<std::size_t>(i)]) += data[i].covariates;
    }
  }

  RiskAggregates aggregates(const Eigen::VectorXd& beta) const {
    return build_aggregates(data_, index_, beta, stabilizing_shift(data_, beta));
  }

  double loglik(const Eigen::VectorXd& beta) const {
    const RiskAggregates agg = aggregates(beta);
    double ll = 0.0;
    for (int k = 0; k < agg.groups(); ++k) {
      const int d = index_->event_counts[static_cast<std::size_t>(k)];
      if (d == 0) continue;
      ll += beta.dot(event_sums_.col(k)) - d * (std::log(agg.s0(k)) + agg.log_scale());
    }
    return ll;
  }

  Evaluation evaluate(const Eigen::VectorXd& beta) const {
    const int p = data_.covariate_dim();
    const RiskAggregates agg = aggregates(beta);
    Evaluation ev;
    ev.score = Eigen::VectorXd::Zero(p);
    ev.information = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd mean(p);
    for (int k = 0; k < agg.groups(); ++k) {
      const int d = index_->event_counts[static_cast<std::size_t>(k)];
      if (d == 0) continue;
      const double s0 = agg.s0(k);
      mean = agg.s1(k) / s0;
      ev.loglik += beta.dot(event_sums_.col(k)) - d * (std::log(s0) + agg.log_scale());
      ev.score += event_sums_.col(k) - d * mean;
      ev.information.noalias() += d * (agg.s2(k) / s0 - mean * mean.transpose());
    }
    ev.information = 0.5 * (ev.information + ev.information.transpose()).eval();
    return ev;
  }

  // Uncentered second moment sum d_k s2/s0, the scale against which a
  // vanishing information is judged.
  double moment_scale(const Eigen::VectorXd& beta) const {
    const RiskAggregates agg = aggregates(beta);
    double scale = 0.0;
    for (int k = 0; k < agg.groups(); ++k) {
      const int d = index_->event_counts[static_cast<std::size_t>(k)];
      if (d > 0) scale += d * agg.s2(k).diagonal().maxCoeff() / agg.s0(k);
    }
    return scale;
  }

 private:
  const SurvivalDataset& data_;
  std::shared_ptr<const RiskSetIndex> index_;
  Eigen::MatrixXd event_sums_;
};

bool is_singular(const Eigen::MatrixXd& info, double max_condition, double scale) {
  if (!info.allFinite()) return true;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return true;
  if (hi / lo > max_condition) return true;
  return lo <= scale / max_condition;
}

}  // namespace

std::string_view to_string(FitStatus status) {
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max_iterations";
    case FitStatus::separation_detected: return "separation_detected";
    case FitStatus::singular_information: return "singular_information";
  }
  return "unknown";
}

double log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  require_covariates(data, beta);
  return PartialLikelihood(data).loglik(beta);
}

ScoreInformation score_and_information(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  require_covariates(data, beta);
  Evaluation ev = PartialLikelihood(data).evaluate(beta);
  return {std::move(ev.score), std::move(ev.information)};
}

CoxFit fit_mple(const SurvivalDataset& data, const FitOptions& options) {
  return fit_mple(data, Eigen::VectorXd::Zero(data.covariate_dim()), options);
}

CoxFit fit_mple(const SurvivalDataset& data, const Eigen::VectorXd& init, const FitOptions& options) {
  require_covariates(data, init);
  const PartialLikelihood pl(data);

  CoxFit fit;
  fit.beta_hat = init;
  Evaluation ev = pl.evaluate(init);

  const auto finish = [&](FitStatus status) {
    fit.log_partial_likelihood = ev.loglik;
    fit.score_norm = ev.score.norm();
    fit.information = ev.information;
    fit.status = status;
    return fit;
  };

  // A degenerate design (zero-variance or collinear covariates) shows up as
  // a vanishing information at beta = 0 relative to the second moment.
  {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(init.size());
    const Evaluation at_zero = init.isZero(0.0) ? ev : pl.evaluate(zero);
    if (is_singular(at_zero.information, options.max_condition, pl.moment_scale(zero))) {
      return finish(FitStatus::singular_information);
    }
  }

  while (true) {
    if (is_singular(ev.information, options.max_condition, 0.0)) return finish(FitStatus::singular_information);
    const Eigen::VectorXd step = ev.information.ldlt().solve(ev.score);
    const double score_norm = ev.score.norm();
    // A tiny score with a large Newton step means the likelihood is flat
    // because beta is running off to infinity, not that we are done.
    const double beta_scale = std::max(1.0, fit.beta_hat.norm());
    if ((score_norm <= options.tol && step.norm() <= 1e-6 * beta_scale) ||
        step.norm() <= options.step_tol * beta_scale) {
      return finish(FitStatus::converged);
    }
    if (fit.iterations >= options.max_iter) return finish(FitStatus::max_iterations);
    ++fit.iterations;

    Eigen::VectorXd candidate;
    double candidate_ll = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    double scale = 1.0;
    // When the predicted gain is below the rounding noise of the
    // log-likelihood, comparing likelihoods says nothing; take the full step.
    const bool in_noise = 0.5 * ev.score.dot(step) <= 1e-12 * (1.0 + std::abs(ev.loglik));
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      candidate = fit.beta_hat + scale * step;
      candidate_ll = pl.loglik(candidate);
      if (candidate_ll >= ev.loglik || in_noise) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      return finish(score_norm <= options.tol ? FitStatus::converged : FitStatus::max_iterations);
    }
    const double previous_ll = ev.loglik;
    fit.beta_hat = candidate;
    ev = pl.evaluate(candidate);
    if (fit.beta_hat.norm() > options.separation_norm && ev.loglik >= previous_ll) {
      return finish(FitStatus::separation_detected);
    }
  }
}

Eigen::MatrixXd score_residuals(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
  require_covariates(data, beta);
  const int n = data.size();
  const int p = data.covariate_dim();
  const auto index = std::make_shared<const RiskSetIndex>(RiskSetIndex::build(data));
  const RiskAggregates agg = build_aggregates(data, index, beta, stabilizing_shift(data, beta));
  const int groups = agg.groups();

  // Cumulative d_k / S0 and d_k Zbar_k / S0 up to each distinct time.
  Eigen::VectorXd cum0(groups);
  Eigen::MatrixXd cum1(p, groups);
  Eigen::MatrixXd mean(p, groups);
  double c0 = 0.0;
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < groups; ++k) {
    mean.col(k) = agg.s1(k) / agg.s0(k);
    const int d = index->event_counts[static_cast<std::size_t>(k)];
    if (d > 0) {
      c0 += d / agg.s0(k);
      c1 += (d / agg.s0(k)) * mean.col(k);
    }
    cum0[k] = c0;
    cum1.col(k) = c1;
  }

  Eigen::MatrixXd residuals(n, p);
  for (int i = 0; i < n; ++i) {
    const int k = index->time_index[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& z = data[i].covariates;
    const double w = std::exp(agg.linear_predictor()[i] - agg.log_scale());
    Eigen::VectorXd r = -w * (z * cum0[k] - cum1.col(k));
    if (data[i].event) r += z - mean.col(k);
    residuals.row(i) = r.transpose();
  }
  return residuals;
}

}  // namespace coxlin
