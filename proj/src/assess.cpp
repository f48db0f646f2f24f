#include "bnn/assess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bnn/errors.hpp"
#include "bnn/stats.hpp"

namespace bnn::assess {

void LogLikMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 1) throw DimensionError("LogLikMatrix is empty");
  if (!values.allFinite()) throw NumericError("LogLikMatrix contains non-finite values");
}

int ElpdResult::n_khat_above(double threshold) const {
  int count = 0;
  for (Eigen::Index i = 0; i < khat.size(); ++i)
    if (khat[i] > threshold) ++count;
  return count;
}

std::pair<double, double> fit_generalized_pareto(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 5) throw ConfigError("GPD fit needs at least 5 exceedances");
  std::sort(x.begin(), x.end());
  if (x.front() <= 0.0) throw ConfigError("GPD exceedances must be positive");
  if (x.front() == x.back()) throw NumericError("GPD fit on a degenerate (constant) sample");

  // Zhang & Stephens (2009): profile likelihood over theta = -k/sigma on a
  // data-driven grid, weighted by the normalized likelihood.
  const std::size_t m = 30 + static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  const double quart = x[static_cast<std::size_t>(static_cast<double>(n) / 4.0 + 0.5) - 1];
  const double x_max = x[n - 1];

  std::vector<double> theta(m), prof(m);
  auto k_of = [&](double th) {
    double s = 0.0;
    for (double xi : x) s += std::log1p(-th * xi);
    return s / static_cast<double>(n);
  };
  for (std::size_t j = 0; j < m; ++j) {
    theta[j] = 1.0 / x_max +
               (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j) + 0.5))) /
                   (3.0 * quart);
    const double k = k_of(theta[j]);
    prof[j] = static_cast<double>(n) * (std::log(-theta[j] / k) - k - 1.0);
  }

  // Posterior-mean theta under the profile weights.
  double theta_hat = 0.0;
  {
    Eigen::Map<Eigen::VectorXd> lp(prof.data(), static_cast<Eigen::Index>(m));
    const double lse = stats::log_sum_exp(lp);
    for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(prof[j] - lse);
  }

  double khat = k_of(theta_hat);
  const double sigma = -khat / theta_hat;
  // Weakly informative prior: shrink khat toward 0.5 with 10 pseudo-observations.
  khat = (khat * static_cast<double>(n) + 5.0) / (static_cast<double>(n) + 10.0);
  return {khat, sigma};
}

PsisResult psis_smooth(const Eigen::VectorXd& log_ratios) {
  const Eigen::Index S = log_ratios.size();
  if (S < 40) throw ConfigError("psis_smooth needs at least 40 draws");
  if (!log_ratios.allFinite()) throw NumericError("log ratios must be finite");

  const auto tail_len = static_cast<Eigen::Index>(
      std::min(std::ceil(0.2 * static_cast<double>(S)),
               std::ceil(3.0 * std::sqrt(static_cast<double>(S)))));

  std::vector<Eigen::Index> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return log_ratios[a] < log_ratios[b]; });

  const double log_max = log_ratios[order[S - 1]];
  PsisResult out;
  out.log_weights = log_ratios;

  // Cutoff: the largest log-ratio not in the tail. Exceedances are measured
  // in weight space relative to it; shifting by log_max keeps exp() tame.
  const double log_cut = log_ratios[order[S - 1 - tail_len]];
  std::vector<double> exceed(tail_len);
  bool degenerate = false;
  for (Eigen::Index i = 0; i < tail_len; ++i) {
    const double w = std::exp(log_ratios[order[S - tail_len + i]] - log_max);
    const double c = std::exp(log_cut - log_max);
    exceed[i] = w - c;
    if (exceed[i] <= 0.0) degenerate = true;
  }

  if (degenerate || tail_len < 5) {
    // Truncation-only fallback; a flat tail has nothing to smooth.
    out.khat = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < S; ++i)
      out.log_weights[i] = std::min(out.log_weights[i], log_max);
    return out;
  }

  double khat, sigma;
  try {
    std::tie(khat, sigma) = fit_generalized_pareto(exceed);
  } catch (const Error&) {
    out.khat = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < S; ++i)
      out.log_weights[i] = std::min(out.log_weights[i], log_max);
    return out;
  }

  // Replace the tail by expected order statistics of the fitted GPD
  // (quantiles at (i - 1/2) / M), truncated at the raw maximum.
  const double c = std::exp(log_cut - log_max);
  for (Eigen::Index i = 0; i < tail_len; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(tail_len);
    double q;  // GPD quantile of the exceedance
    if (std::abs(khat) < 1e-12) {
      q = -sigma * std::log1p(-p);
    } else {
      q = sigma / khat * (std::pow(1.0 - p, -khat) - 1.0);
    }
    const double smoothed = std::min(c + q, 1.0);  // cap at the raw max weight
    out.log_weights[order[S - tail_len + i]] = std::log(smoothed) + log_max;
  }
  out.khat = khat;
  return out;
}

namespace {

double pointwise_se(const Eigen::VectorXd& pointwise) {
  const auto n = static_cast<double>(pointwise.size());
  if (pointwise.size() < 2) return 0.0;
  return std::sqrt(n * stats::variance(pointwise));
}

}  // namespace

ElpdResult elpd_loo(const LogLikMatrix& loglik) {
  loglik.validate();
  const Eigen::Index N = loglik.n_points();

  ElpdResult out;
  out.method = ElpdMethod::PsisLoo;
  out.model_id = loglik.model_id;
  out.pointwise.resize(N);
  out.khat.resize(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    const Eigen::VectorXd log_ratios = -loglik.values.row(n).transpose();
    const PsisResult psis = psis_smooth(log_ratios);
    const Eigen::VectorXd log_num = psis.log_weights + loglik.values.row(n).transpose();
    out.pointwise[n] = stats::log_sum_exp(log_num) - stats::log_sum_exp(psis.log_weights);
    out.khat[n] = psis.khat;
  }
  out.total = stats::kahan_sum(out.pointwise);
  out.se = pointwise_se(out.pointwise);
  return out;
}

ElpdResult elpd_waic(const LogLikMatrix& loglik, WaicPenalty penalty) {
  loglik.validate();
  const Eigen::Index N = loglik.n_points();
  const Eigen::Index S = loglik.n_draws();

  ElpdResult out;
  out.method = ElpdMethod::Waic;
  out.model_id = loglik.model_id;
  out.pointwise.resize(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    const Eigen::VectorXd row = loglik.values.row(n).transpose();
    const double lpd = stats::log_sum_exp(row) - std::log(static_cast<double>(S));
    double p_n;
    if (penalty == WaicPenalty::LogDensityVariance) {
      p_n = stats::variance(row);
    } else {
      p_n = stats::variance(row.array().exp().matrix());
    }
    out.pointwise[n] = lpd - p_n;
  }
  out.total = stats::kahan_sum(out.pointwise);
  out.se = pointwise_se(out.pointwise);
  return out;
}

Eigen::VectorXd brute_force_loo(const Dataset& data, const RefitFn& refit,
                                const PointLoglikFn& point_loglik) {
  data.validate();
  const Eigen::Index N = data.n();
  if (N < 2) throw ConfigError("brute-force LOO needs at least 2 points");

  Eigen::VectorXd result(N);
  for (Eigen::Index held = 0; held < N; ++held) {
    Dataset rest;
    rest.x.resize(N - 1, data.x.cols());
    rest.y.resize(N - 1, data.y.cols());
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
      if (i == held) continue;
      rest.x.row(at) = data.x.row(i);
      rest.y.row(at) = data.y.row(i);
      ++at;
    }
    const Eigen::MatrixXd draws = refit(rest, held);
    const Eigen::VectorXd ll =
        point_loglik(draws, data.x.row(held).transpose(), data.y.row(held).transpose());
    result[held] =
        stats::log_sum_exp(ll) - std::log(static_cast<double>(ll.size()));
  }
  return result;
}

}  // namespace bnn::assess
