#include "bnn/model.hpp"

#include <cmath>

#include "bnn/errors.hpp"
#include "bnn/stats.hpp"

namespace bnn {

std::string to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "sigmoid";
}

std::string to_string(PriorFamily f) {
  return f == PriorFamily::Gaussian ? "gaussian" : "student_t";
}

std::vector<int> NetworkConfig::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(hidden_widths.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_widths.begin(), hidden_widths.end());
  dims.push_back(output_dim);
  return dims;
}

Eigen::Index NetworkConfig::param_count() const {
  const auto dims = layer_dims();
  Eigen::Index count = 1;  // log_sigma
  for (std::size_t l = 1; l < dims.size(); ++l) {
    count += static_cast<Eigen::Index>(dims[l - 1] + 1) * dims[l];
  }
  return count;
}

double NetworkConfig::weight_prior_var(int layer) const {
  const int L = depth();
  if (layer < 1 || layer > L + 1) throw DimensionError("weight_prior_var: no such layer", layer);
  if (layer == 1) return 1.0 / (4.0 * L);
  return 4.0 / static_cast<double>(layer_dims()[layer - 1]);
}

double NetworkConfig::bias_prior_var(int layer) const {
  const int L = depth();
  if (layer < 1 || layer > L + 1) throw DimensionError("bias_prior_var: no such layer", layer);
  return 1.0 / (4.0 * L);
}

void NetworkConfig::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be positive");
  if (output_dim < 1) throw ConfigError("output_dim must be positive");
  if (hidden_widths.empty()) throw ConfigError("at least one hidden layer is required");
  for (int w : hidden_widths)
    if (w < 1) throw ConfigError("hidden widths must be positive");
  if (student_t_df <= 0.0) throw ConfigError("student_t_df must be positive");
  if (noise_prior_scale_sq <= 0.0) throw ConfigError("noise_prior_scale_sq must be positive");
}

ParamVector ParamVector::zeros(const NetworkConfig& config) {
  return ParamVector(Eigen::VectorXd::Zero(config.param_count()));
}

ParamLayout::ParamLayout(const NetworkConfig& config) {
  const auto dims = config.layer_dims();
  const int n_layers = static_cast<int>(dims.size()) - 1;
  Eigen::Index off = 0;
  for (int l = 1; l <= n_layers; ++l) {
    rows_.push_back(dims[l]);
    cols_.push_back(dims[l - 1]);
    w_off_.push_back(off);
    off += static_cast<Eigen::Index>(dims[l]) * dims[l - 1];
    b_off_.push_back(off);
    off += dims[l];
  }
  total_ = off + 1;
}

Eigen::Map<const Eigen::MatrixXd> ParamLayout::weights(const ParamVector& p, int layer) const {
  return {p.values.data() + weight_offset(layer), rows(layer), cols(layer)};
}

Eigen::Map<const Eigen::VectorXd> ParamLayout::biases(const ParamVector& p, int layer) const {
  return {p.values.data() + bias_offset(layer), rows(layer)};
}

Eigen::Map<Eigen::MatrixXd> ParamLayout::weights(Eigen::VectorXd& flat, int layer) const {
  return {flat.data() + weight_offset(layer), rows(layer), cols(layer)};
}

Eigen::Map<Eigen::VectorXd> ParamLayout::biases(Eigen::VectorXd& flat, int layer) const {
  return {flat.data() + bias_offset(layer), rows(layer)};
}

void Dataset::validate() const {
  if (x.rows() < 1) throw DimensionError("dataset must contain at least one row");
  if (x.rows() != y.rows()) throw DimensionError("x and y row counts differ");
}

namespace {

void check_params(const NetworkConfig& config, const ParamVector& params) {
  if (params.size() != config.param_count())
    throw DimensionError("parameter vector length " + std::to_string(params.size()) +
                         " does not match config parameter count " +
                         std::to_string(config.param_count()));
}

void check_shapes(const NetworkConfig& config, const ParamVector& params,
                  const Eigen::MatrixXd& x) {
  if (x.cols() != config.input_dim)
    throw DimensionError("input has " + std::to_string(x.cols()) +
                             " columns, model expects " + std::to_string(config.input_dim),
                         0);
  check_params(config, params);
}

inline void apply_activation(Eigen::MatrixXd& a, Activation g) {
  if (g == Activation::ReLU) {
    a = a.cwiseMax(0.0);
  } else {
    a = ((-a.array()).exp() + 1.0).inverse();
  }
}

// Scales `back` by dz/da in place. Both activations expose their derivative
// through the activation value z itself; ReLU's subgradient at 0 is 0, which
// (z > 0) encodes exactly.
inline void scale_by_activation_grad(Eigen::MatrixXd& back, const Eigen::MatrixXd& z,
                                     Activation g) {
  if (g == Activation::ReLU) {
    back.array() *= (z.array() > 0.0).cast<double>();
  } else {
    back.array() *= z.array() * (1.0 - z.array());
  }
}

// Per-coordinate log prior density and score of a centered F(0, var) variable.
struct PriorBlock {
  PriorFamily family;
  double var;  // variance (Gaussian) or squared scale (Student-t)
  double df;

  double log_density_sum(Eigen::Map<const Eigen::MatrixXd> block) const {
    double total = 0.0;
    if (family == PriorFamily::Gaussian) {
      const double c = -0.5 * (stats::log_2pi + std::log(var));
      total = block.size() * c - block.array().square().sum() / (2.0 * var);
    } else {
      for (Eigen::Index i = 0; i < block.size(); ++i)
        total += stats::log_student_t_pdf(block.data()[i], var, df);
    }
    return total;
  }

  double log_density_sum(Eigen::Map<const Eigen::VectorXd> block) const {
    return log_density_sum(Eigen::Map<const Eigen::MatrixXd>(block.data(), block.size(), 1));
  }

  // Adds d log p / d theta into grad (same flat layout as the block).
  template <typename Src, typename Dst>
  void add_score(const Src& block, Dst grad) const {
    if (family == PriorFamily::Gaussian) {
      grad.array() -= block.array() / var;
    } else {
      grad.array() -=
          (df + 1.0) * block.array() / (df * var + block.array().square());
    }
  }
};

PriorBlock weight_prior(const NetworkConfig& config, int layer) {
  return {config.prior_family, config.weight_prior_var(layer), config.student_t_df};
}

PriorBlock bias_prior(const NetworkConfig& config, int layer) {
  // Biases are always Gaussian.
  return {PriorFamily::Gaussian, config.bias_prior_var(layer), 0.0};
}

}  // namespace

Eigen::MatrixXd forward(const NetworkConfig& config, const ParamVector& params,
                        const Eigen::MatrixXd& x) {
  check_shapes(config, params, x);
  const ParamLayout layout(config);
  const int n_layers = layout.n_layers();
  Eigen::MatrixXd z = x;
  for (int l = 1; l <= n_layers; ++l) {
    Eigen::MatrixXd a = z * layout.weights(params, l).transpose();
    a.rowwise() += layout.biases(params, l).transpose();
    if (l < n_layers) apply_activation(a, config.activation);
    z = std::move(a);
  }
  return z;
}

double log_prior(const NetworkConfig& config, const ParamVector& params) {
  check_params(config, params);
  const ParamLayout layout(config);
  double total = 0.0;
  for (int l = 1; l <= layout.n_layers(); ++l) {
    total += weight_prior(config, l).log_density_sum(layout.weights(params, l));
    total += bias_prior(config, l).log_density_sum(layout.biases(params, l));
  }
  // Half-normal on sigma, plus the log sigma Jacobian of the log transform.
  const double log_sigma = params.log_sigma();
  const double sigma = std::exp(log_sigma);
  total += stats::log_half_normal_pdf(sigma, config.noise_prior_scale_sq) + log_sigma;
  return total;
}

double log_likelihood(const NetworkConfig& config, const ParamVector& params,
                      const Dataset& data) {
  data.validate();
  if (data.y.cols() != config.output_dim)
    throw DimensionError("y has " + std::to_string(data.y.cols()) +
                         " columns, model expects " + std::to_string(config.output_dim));
  const Eigen::MatrixXd mu = forward(config, params, data.x);
  const double sigma = params.sigma();
  const double var = sigma * sigma;
  const Eigen::Index n_terms = mu.size();
  const double c = -0.5 * (stats::log_2pi + std::log(var));
  Eigen::ArrayXXd sq = (data.y - mu).array().square();
  const double rss = stats::kahan_sum(sq.data(), n_terms);
  const double result = static_cast<double>(n_terms) * c - rss / (2.0 * var);
  if (!std::isfinite(result))
    throw NumericError("log_likelihood is not finite (overflow in forward pass?)");
  return result;
}

double log_posterior(const NetworkConfig& config, const ParamVector& params,
                     const Dataset& data) {
  return log_prior(config, params) + log_likelihood(config, params, data);
}

double log_posterior_with_grad(const NetworkConfig& config, const ParamVector& params,
                               const Dataset& data, Eigen::VectorXd& grad) {
  data.validate();
  check_shapes(config, params, data.x);
  if (data.y.cols() != config.output_dim)
    throw DimensionError("y has " + std::to_string(data.y.cols()) +
                         " columns, model expects " + std::to_string(config.output_dim));
  const ParamLayout layout(config);
  const int n_layers = layout.n_layers();

  // Forward pass, keeping activations for the backward one.
  std::vector<Eigen::MatrixXd> acts(n_layers + 1);  // acts[l] = z_l
  acts[0] = data.x;
  for (int l = 1; l <= n_layers; ++l) {
    Eigen::MatrixXd a;
    a.noalias() = acts[l - 1] * layout.weights(params, l).transpose();
    a.rowwise() += layout.biases(params, l).transpose();
    if (l < n_layers) apply_activation(a, config.activation);
    acts[l] = std::move(a);
  }
  const Eigen::MatrixXd& mu = acts[n_layers];

  const double log_sigma = params.log_sigma();
  const double sigma = std::exp(log_sigma);
  const double var = sigma * sigma;
  const Eigen::Index n_terms = mu.size();

  Eigen::MatrixXd resid = data.y - mu;
  Eigen::ArrayXXd sq = resid.array().square();
  const double rss = stats::kahan_sum(sq.data(), n_terms);
  const double loglik =
      -0.5 * n_terms * (stats::log_2pi + std::log(var)) - rss / (2.0 * var);

  grad = Eigen::VectorXd::Zero(layout.total());

  // Backward pass through the likelihood term.
  Eigen::MatrixXd delta = resid / var;  // d loglik / d mu
  for (int l = n_layers; l >= 1; --l) {
    layout.weights(grad, l).noalias() = delta.transpose() * acts[l - 1];
    layout.biases(grad, l) = delta.colwise().sum();
    if (l > 1) {
      Eigen::MatrixXd back;
      back.noalias() = delta * layout.weights(params, l);
      scale_by_activation_grad(back, acts[l - 1], config.activation);
      delta = std::move(back);
    }
  }
  // d loglik / d log_sigma.
  grad[layout.log_sigma_index()] = -static_cast<double>(n_terms) + rss / var;

  // Prior terms: score plus the log density itself.
  double logp = 0.0;
  for (int l = 1; l <= n_layers; ++l) {
    const PriorBlock wp = weight_prior(config, l);
    const PriorBlock bp = bias_prior(config, l);
    logp += wp.log_density_sum(layout.weights(params, l));
    logp += bp.log_density_sum(layout.biases(params, l));
    wp.add_score(layout.weights(params, l), layout.weights(grad, l));
    bp.add_score(layout.biases(params, l), layout.biases(grad, l));
  }
  logp += stats::log_half_normal_pdf(sigma, config.noise_prior_scale_sq) + log_sigma;
  // d/d log_sigma of (-sigma^2 / (2 v0) + log sigma).
  grad[layout.log_sigma_index()] += -var / config.noise_prior_scale_sq + 1.0;

  const double value = logp + loglik;
  if (!std::isfinite(value))
    throw NumericError("log_posterior is not finite");
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError("gradient of log_posterior is not finite", i);
  return value;
}

Eigen::VectorXd grad_log_posterior(const NetworkConfig& config, const ParamVector& params,
                                   const Dataset& data) {
  Eigen::VectorXd grad;
  log_posterior_with_grad(config, params, data, grad);
  return grad;
}

}  // namespace bnn
