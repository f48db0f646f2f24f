#ifndef BNN_VI_HPP
#define BNN_VI_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bnn/draws.hpp"
#include "bnn/model.hpp"
#include "bnn/rng.hpp"
#include "bnn/target.hpp"

namespace bnn::vi {

// Mean-field Gaussian q(theta) = N(mu, diag(exp(log_std)^2)).
struct VariationalParams {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_std;

  Eigen::Index dim() const { return mu.size(); }
  Eigen::VectorXd stddev() const { return log_std.array().exp(); }
  void validate() const;
};

enum class InitMode { ToFeasible, ToMean };

struct ViConfig {
  int iterations = 10000;
  double learning_rate = 5e-3;
  int mc_samples_per_step = 1;
  InitMode init_mode = InitMode::ToFeasible;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TracePoint {
  int iteration;
  double elbo;  // 10-step moving average of the per-step estimates
};

struct AdviFit {
  VariationalParams params;
  std::vector<TracePoint> trace;
  double wall_time_s = 0.0;
  double final_elbo = 0.0;
  Eigen::VectorXd initial_mu;
};

// ToFeasible: mu ~ Uniform[-2, 2] ignoring the prior; ToMean: mu = 0.
// Both start with log_std = -2.
VariationalParams init_variational(Eigen::Index dim, InitMode mode, RngStream& rng);

// Closed-form entropy of q: sum(log_std) + d/2 (1 + log 2pi).
double entropy(const VariationalParams& q);

// Unbiased Monte Carlo ELBO estimate via the reparameterization
// theta = mu + exp(log_std) * eps, eps ~ N(0, I).
double elbo_estimate(const VariationalParams& q, const LogDensityTarget& target,
                     int mc_samples, RngStream& rng);

// Unbiased reparameterization gradient (d ELBO / d mu, d ELBO / d log_std).
// Consumes the RNG exactly as elbo_estimate does, so common-random-number
// comparisons line up.
std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_elbo(const VariationalParams& q,
                                                      const LogDensityTarget& target,
                                                      int mc_samples, RngStream& rng);

// Maximizes the ELBO with Adam for config.iterations steps.
AdviFit fit_advi(const LogDensityTarget& target, const ViConfig& config);

// Convenience entry points on the BNN posterior.
double elbo_estimate(const VariationalParams& q, const NetworkConfig& config,
                     const Dataset& data, int mc_samples, RngStream& rng);
std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_elbo(const VariationalParams& q,
                                                      const NetworkConfig& config,
                                                      const Dataset& data, int mc_samples,
                                                      RngStream& rng);
AdviFit fit_advi(const NetworkConfig& config, const Dataset& data, const ViConfig& vi_config);

// S independent draws theta_s = mu + exp(log_std) * eps_s.
PosteriorDraws sample_variational(const VariationalParams& q, Eigen::Index n_draws,
                                  RngStream& rng);

}  // namespace bnn::vi

#endif  // BNN_VI_HPP
