#ifndef BNN_MODEL_HPP
#define BNN_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace bnn {

enum class Activation { ReLU, Sigmoid };
enum class PriorFamily { Gaussian, StudentT };

std::string to_string(Activation a);
std::string to_string(PriorFamily f);

// Architecture and prior specification of the feed-forward regression model
//
//   y ~ N(b_{L+1} + W_{L+1} z_L, sigma),   z_l = g(b_l + W_l z_{l-1}),  z_0 = x,
//
// with layer-width-scaled priors
//
//   W_1 ~ F(0, 1/(4L)),  W_l ~ F(0, 4/D_{l-1}) for l >= 2,  b_l ~ N(0, 1/(4L)),
//   sigma ~ |N(0, noise_prior_scale_sq)|.
//
// F is Gaussian or Student-t; its second argument is a variance (Gaussian) or
// squared scale (Student-t).
struct NetworkConfig {
  int input_dim = 1;
  std::vector<int> hidden_widths = {20};
  int output_dim = 1;
  Activation activation = Activation::ReLU;
  PriorFamily prior_family = PriorFamily::Gaussian;
  double student_t_df = 5.0;
  double noise_prior_scale_sq = 0.001;

  int depth() const { return static_cast<int>(hidden_widths.size()); }

  // D_0 .. D_{L+1}: input, hidden widths, output.
  std::vector<int> layer_dims() const;

  // Total flat length: sum_l (D_{l-1}+1) D_l plus one trailing log_sigma slot.
  Eigen::Index param_count() const;

  // Configured prior variance (Gaussian) / squared scale (Student-t) of the
  // weights entering layer l, l in 1..L+1.
  double weight_prior_var(int layer) const;
  double bias_prior_var(int layer) const;

  void validate() const;
};

// Flat unconstrained parameter vector. Layout: for each layer l = 1..L+1 a
// column-major weight block (D_l x D_{l-1}) followed by the bias block (D_l);
// one trailing slot holds log(sigma).
struct ParamVector {
  Eigen::VectorXd values;

  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd v) : values(std::move(v)) {}
  static ParamVector zeros(const NetworkConfig& config);

  Eigen::Index size() const { return values.size(); }
  double log_sigma() const { return values[values.size() - 1]; }
  double sigma() const { return std::exp(log_sigma()); }
};

// Per-layer views into a flat parameter vector (or a gradient of its shape).
class ParamLayout {
 public:
  explicit ParamLayout(const NetworkConfig& config);

  Eigen::Index total() const { return total_; }
  Eigen::Index weight_offset(int layer) const { return w_off_[layer - 1]; }
  Eigen::Index bias_offset(int layer) const { return b_off_[layer - 1]; }
  Eigen::Index log_sigma_index() const { return total_ - 1; }
  int rows(int layer) const { return rows_[layer - 1]; }
  int cols(int layer) const { return cols_[layer - 1]; }
  int n_layers() const { return static_cast<int>(rows_.size()); }

  Eigen::Map<const Eigen::MatrixXd> weights(const ParamVector& p, int layer) const;
  Eigen::Map<const Eigen::VectorXd> biases(const ParamVector& p, int layer) const;
  Eigen::Map<Eigen::MatrixXd> weights(Eigen::VectorXd& flat, int layer) const;
  Eigen::Map<Eigen::VectorXd> biases(Eigen::VectorXd& flat, int layer) const;

 private:
  std::vector<Eigen::Index> w_off_, b_off_;
  std::vector<int> rows_, cols_;
  Eigen::Index total_;
};

struct Dataset {
  Eigen::MatrixXd x;  // N x input_dim
  Eigen::MatrixXd y;  // N x output_dim
  std::map<std::string, std::string> meta;

  Eigen::Index n() const { return x.rows(); }
  void validate() const;
};

// Noiseless signal b_{L+1} + W_{L+1} z_L, one row per input row.
Eigen::MatrixXd forward(const NetworkConfig& config, const ParamVector& params,
                        const Eigen::MatrixXd& x);

// Exact log density of all parameters under the configured priors, evaluated
// in unconstrained space (the half-normal on sigma picks up a +log sigma
// change-of-variables term).
double log_prior(const NetworkConfig& config, const ParamVector& params);

double log_likelihood(const NetworkConfig& config, const ParamVector& params,
                      const Dataset& data);

double log_posterior(const NetworkConfig& config, const ParamVector& params,
                     const Dataset& data);

// Exact reverse-mode gradient of log_posterior w.r.t. the unconstrained
// parameters. ReLU derivative at 0 is taken as 0.
Eigen::VectorXd grad_log_posterior(const NetworkConfig& config, const ParamVector& params,
                                   const Dataset& data);

// Fused value + gradient; the inference engines call this in their inner loop.
double log_posterior_with_grad(const NetworkConfig& config, const ParamVector& params,
                               const Dataset& data, Eigen::VectorXd& grad_out);

}  // namespace bnn

#endif  // BNN_MODEL_HPP
