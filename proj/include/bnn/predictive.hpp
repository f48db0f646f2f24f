#ifndef BNN_PREDICTIVE_HPP
#define BNN_PREDICTIVE_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bnn/draws.hpp"
#include "bnn/model.hpp"
#include "bnn/rng.hpp"

namespace bnn {

// Posterior predictive draws at new inputs: one row per parameter draw, one
// column per prediction point. y_samples adds observation noise with the
// per-draw sigma. Multi-output models are flattened point-major, so column
// n * output_dim + j is output j at input row n.
struct PredictiveSamples {
  Eigen::MatrixXd mu_samples;  // S x (N * output_dim)
  Eigen::MatrixXd y_samples;   // S x (N * output_dim)
  Eigen::MatrixXd x_new;

  Eigen::Index n_draws() const { return mu_samples.rows(); }
  Eigen::Index n_points() const { return mu_samples.cols(); }
  void validate() const;
};

PredictiveSamples posterior_predictive(const PosteriorDraws& draws,
                                       const NetworkConfig& config,
                                       const Eigen::MatrixXd& x_new, RngStream& rng);

// Parameter draws from the configured priors; feeding these to
// posterior_predictive gives the prior predictive distribution.
PosteriorDraws sample_prior_draws(const NetworkConfig& config, Eigen::Index n_draws,
                                  RngStream& rng);

// sqrt(mean_n (y_n - mean_s y_samples[s, n])^2), compensated summation.
double rmse(const PredictiveSamples& pred, const Eigen::MatrixXd& y_true);
double rmse_against(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& y_true);

// Fraction of y_true entries inside the central `level` interval of the
// corresponding sample column (type-7 quantiles). Needs at least 40 draws.
double empirical_coverage(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& y_true,
                          double level = 0.95);

// N x S pointwise log-likelihood matrix: log N(y_n | mu_s(x_n), sigma_s^2).
// Column s sums to log_likelihood(config, draw s, data) exactly.
Eigen::MatrixXd pointwise_log_lik(const PosteriorDraws& draws, const NetworkConfig& config,
                                  const Dataset& data);

// Gaussian-kernel density estimates with Silverman bandwidth on a shared
// grid: one curve per predictive replicate (at most 50, evenly strided) and
// one for the observed data.
struct PpcKde {
  Eigen::VectorXd grid;
  std::vector<Eigen::VectorXd> replicate_curves;
  Eigen::VectorXd observed_curve;
};

PpcKde ppc_kde(const Eigen::MatrixXd& y_samples, const Eigen::VectorXd& y_obs,
               const Eigen::VectorXd& grid);

double silverman_bandwidth(const Eigen::VectorXd& sample);

// One row of the metrics CSV shared by single models and combinations.
struct MetricRow {
  std::string run_id;
  std::string method;
  int width = 0;
  int depth = 0;
  std::string prior;
  double rmse = 0.0;
  double ec_signal = 0.0;
  double ec_obs = 0.0;
  double tt_seconds = 0.0;

  static std::string csv_header();
  std::string to_csv() const;
};

}  // namespace bnn

#endif  // BNN_PREDICTIVE_HPP
