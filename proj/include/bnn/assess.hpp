#ifndef BNN_ASSESS_HPP
#define BNN_ASSESS_HPP

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bnn/model.hpp"

namespace bnn::assess {

// N x S pointwise log-likelihood evaluations for one model.
struct LogLikMatrix {
  Eigen::MatrixXd values;
  std::string model_id;

  Eigen::Index n_points() const { return values.rows(); }
  Eigen::Index n_draws() const { return values.cols(); }
  void validate() const;
};

enum class ElpdMethod { PsisLoo, Waic };

inline constexpr double kKhatWarn = 0.7;
inline constexpr double kKhatBad = 1.0;

struct ElpdResult {
  Eigen::VectorXd pointwise;
  double total = 0.0;
  double se = 0.0;
  Eigen::VectorXd khat;  // empty for WAIC
  ElpdMethod method = ElpdMethod::PsisLoo;
  std::string model_id;

  int n_khat_above(double threshold) const;
};

// Zhang-Stephens posterior-mean fit of a generalized Pareto distribution to
// positive exceedances, with the usual weak prior pulling khat toward 0.5.
// Returns (khat, sigma).
std::pair<double, double> fit_generalized_pareto(std::vector<double> tail_sample);

// Pareto smoothed importance weights. The largest M = min(ceil(0.2 S),
// ceil(3 sqrt(S))) log-ratios are replaced by expected order statistics of a
// fitted GPD and everything is truncated at the raw maximum. If the tail is
// degenerate the GPD step is skipped (truncation only) and khat is +inf.
struct PsisResult {
  Eigen::VectorXd log_weights;  // unnormalized
  double khat = 0.0;
};

PsisResult psis_smooth(const Eigen::VectorXd& log_ratios);

// PSIS-LOO expected log pointwise predictive density. Ratios are
// r_n^s = exp(-loglik[n, s]); per point, elpd_loo,n = log-weighted average of
// the pointwise likelihood under the smoothed weights.
ElpdResult elpd_loo(const LogLikMatrix& loglik);

enum class WaicPenalty {
  LogDensityVariance,  // standard: Var_s log p(y_n | theta_s)
  DensityVariance,     // the literal printed formula: Var_s p(y_n | theta_s)
};

ElpdResult elpd_waic(const LogLikMatrix& loglik,
                     WaicPenalty penalty = WaicPenalty::LogDensityVariance);

// Test-harness oracle: refits the model N times, leaving one point out each
// time, and evaluates log p(y_n | D_-n) by averaging the pointwise likelihood
// over fresh draws. `refit` maps (training subset, point index) to draws;
// `point_loglik` maps (draws, held-out x row, held-out y row) to the length-S
// log-density vector at the held-out point.
using RefitFn = std::function<Eigen::MatrixXd(const Dataset&, Eigen::Index)>;
using PointLoglikFn = std::function<Eigen::VectorXd(
    const Eigen::MatrixXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>;

Eigen::VectorXd brute_force_loo(const Dataset& data, const RefitFn& refit,
                                const PointLoglikFn& point_loglik);

}  // namespace bnn::assess

#endif  // BNN_ASSESS_HPP
