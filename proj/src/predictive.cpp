#include "bnn/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bnn/errors.hpp"
#include "bnn/stats.hpp"

namespace bnn {

void PredictiveSamples::validate() const {
  if (mu_samples.rows() != y_samples.rows() || mu_samples.cols() != y_samples.cols())
    throw DimensionError("mu_samples and y_samples shapes differ");
  if (mu_samples.rows() < 1) throw DimensionError("PredictiveSamples is empty");
}

PredictiveSamples posterior_predictive(const PosteriorDraws& draws,
                                       const NetworkConfig& config,
                                       const Eigen::MatrixXd& x_new, RngStream& rng) {
  draws.validate();
  if (draws.n_params() != config.param_count())
    throw DimensionError("draws are incompatible with the network config");
  const Eigen::Index S = draws.n_draws();
  const Eigen::Index cols = x_new.rows() * config.output_dim;

  PredictiveSamples out;
  out.x_new = x_new;
  out.mu_samples.resize(S, cols);
  out.y_samples.resize(S, cols);
  for (Eigen::Index s = 0; s < S; ++s) {
    const ParamVector theta(draws.draws.row(s).transpose());
    const Eigen::MatrixXd mu = forward(config, theta, x_new);  // N x output_dim
    const double sigma = theta.sigma();
    for (Eigen::Index n = 0; n < x_new.rows(); ++n) {
      for (int j = 0; j < config.output_dim; ++j) {
        const Eigen::Index c = n * config.output_dim + j;
        out.mu_samples(s, c) = mu(n, j);
        out.y_samples(s, c) = mu(n, j) + sigma * rng.normal();
      }
    }
  }
  return out;
}

PosteriorDraws sample_prior_draws(const NetworkConfig& config, Eigen::Index n_draws,
                                  RngStream& rng) {
  config.validate();
  if (n_draws < 1) throw ConfigError("number of draws must be >= 1");
  const ParamLayout layout(config);
  PosteriorDraws out;
  out.draws.resize(n_draws, layout.total());
  for (Eigen::Index s = 0; s < n_draws; ++s) {
    Eigen::VectorXd flat(layout.total());
    for (int l = 1; l <= layout.n_layers(); ++l) {
      const double w_scale = std::sqrt(config.weight_prior_var(l));
      const double b_scale = std::sqrt(config.bias_prior_var(l));
      auto w = layout.weights(flat, l);
      for (Eigen::Index i = 0; i < w.size(); ++i)
        w.data()[i] = config.prior_family == PriorFamily::Gaussian
                          ? w_scale * rng.normal()
                          : w_scale * rng.student_t(config.student_t_df);
      auto b = layout.biases(flat, l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = b_scale * rng.normal();
    }
    const double sigma =
        std::abs(std::sqrt(config.noise_prior_scale_sq) * rng.normal());
    flat[layout.log_sigma_index()] = std::log(std::max(sigma, 1e-300));
    out.draws.row(s) = flat.transpose();
  }
  out.source = PosteriorDraws::Source::Vi;
  out.samples_per_chain = n_draws;
  return out;
}

double rmse_against(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& y_true) {
  const Eigen::Index cols = samples.cols();
  if (y_true.size() != cols)
    throw DimensionError("y_true length does not match sample columns");
  Eigen::VectorXd sq(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double mean_s = stats::kahan_sum(samples.col(c).eval()) / samples.rows();
    // y_true is point-major; its storage order matches the flattened columns.
    const double r = y_true(c / y_true.cols(), c % y_true.cols()) - mean_s;
    sq[c] = r * r;
  }
  return std::sqrt(stats::kahan_sum(sq) / static_cast<double>(cols));
}

double rmse(const PredictiveSamples& pred, const Eigen::MatrixXd& y_true) {
  pred.validate();
  return rmse_against(pred.y_samples, y_true);
}

double empirical_coverage(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& y_true,
                          double level) {
  if (samples.rows() < 40)
    throw ConfigError("empirical_coverage needs at least 40 draws for stable quantiles");
  if (level <= 0.0 || level >= 1.0) throw ConfigError("coverage level must lie in (0, 1)");
  if (y_true.size() != samples.cols())
    throw DimensionError("y_true length does not match sample columns");
  const double lo_p = 0.5 * (1.0 - level);
  const double hi_p = 1.0 - lo_p;
  Eigen::Index inside = 0;
  std::vector<double> col(samples.rows());
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    for (Eigen::Index s = 0; s < samples.rows(); ++s) col[s] = samples(s, c);
    std::sort(col.begin(), col.end());
    const double lo = stats::quantile_sorted(col, lo_p);
    const double hi = stats::quantile_sorted(col, hi_p);
    const double y = y_true(c / y_true.cols(), c % y_true.cols());
    if (y >= lo && y <= hi) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(samples.cols());
}

Eigen::MatrixXd pointwise_log_lik(const PosteriorDraws& draws, const NetworkConfig& config,
                                  const Dataset& data) {
  draws.validate();
  data.validate();
  const Eigen::Index S = draws.n_draws();
  const Eigen::Index N = data.n();
  Eigen::MatrixXd ll(N, S);
  for (Eigen::Index s = 0; s < S; ++s) {
    const ParamVector theta(draws.draws.row(s).transpose());
    const Eigen::MatrixXd mu = forward(config, theta, data.x);
    const double sigma = theta.sigma();
    const double var = sigma * sigma;
    for (Eigen::Index n = 0; n < N; ++n) {
      double point = 0.0;
      for (int j = 0; j < config.output_dim; ++j)
        point += stats::log_normal_pdf(data.y(n, j), mu(n, j), var);
      ll(n, s) = point;
    }
  }
  if (!ll.allFinite()) throw NumericError("pointwise log-likelihood is not finite");
  return ll;
}

double silverman_bandwidth(const Eigen::VectorXd& sample) {
  if (sample.size() < 2) throw ConfigError("bandwidth needs at least 2 values");
  const double sd = std::sqrt(stats::variance(sample));
  std::vector<double> v(sample.data(), sample.data() + sample.size());
  std::sort(v.begin(), v.end());
  const double iqr = stats::quantile_sorted(v, 0.75) - stats::quantile_sorted(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = sd;
  if (spread <= 0.0) {
    // Degenerate (constant) sample: a narrow floor so the estimate stays a
    // sharp but finite spike.
    return std::max(1e-3, 1e-3 * std::abs(sample[0]));
  }
  return 0.9 * spread * std::pow(static_cast<double>(sample.size()), -0.2);
}

namespace {

Eigen::VectorXd kde_curve(const Eigen::VectorXd& sample, const Eigen::VectorXd& grid) {
  const double h = silverman_bandwidth(sample);
  const double norm = 1.0 / (sample.size() * h * std::sqrt(2.0 * M_PI));
  Eigen::VectorXd curve(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
      const double z = (grid[g] - sample[i]) / h;
      acc += std::exp(-0.5 * z * z);
    }
    curve[g] = norm * acc;
  }
  return curve;
}

}  // namespace

PpcKde ppc_kde(const Eigen::MatrixXd& y_samples, const Eigen::VectorXd& y_obs,
               const Eigen::VectorXd& grid) {
  if (grid.size() < 2) throw ConfigError("ppc_kde needs a grid with at least 2 points");
  PpcKde out;
  out.grid = grid;
  const Eigen::Index S = y_samples.rows();
  const Eigen::Index n_rep = std::min<Eigen::Index>(50, S);
  out.replicate_curves.reserve(n_rep);
  for (Eigen::Index k = 0; k < n_rep; ++k) {
    const Eigen::Index s = k * S / n_rep;  // even stride
    out.replicate_curves.push_back(kde_curve(y_samples.row(s).transpose(), grid));
  }
  out.observed_curve = kde_curve(y_obs, grid);
  return out;
}

std::string MetricRow::csv_header() {
  return "run_id,method,width,depth,prior,rmse,ec_signal,ec_obs,tt_seconds";
}

std::string MetricRow::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << run_id << ',' << method << ',' << width << ',' << depth << ',' << prior << ','
     << rmse << ',' << ec_signal << ',' << ec_obs << ',' << tt_seconds;
  return os.str();
}

}  // namespace bnn
