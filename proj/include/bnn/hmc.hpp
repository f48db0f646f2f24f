#ifndef BNN_HMC_HPP
#define BNN_HMC_HPP

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bnn/draws.hpp"
#include "bnn/model.hpp"
#include "bnn/target.hpp"

namespace bnn::hmc {

struct NutsConfig {
  int warmup = 1000;
  int samples = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  int chains = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// One symplectic leapfrog step with identity mass matrix:
// half momentum, full position, half momentum.
std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog(const Eigen::VectorXd& position,
                                                     const Eigen::VectorXd& momentum,
                                                     double step_size, const GradFn& grad);

// Nesterov dual averaging of the log step size (Hoffman-Gelman), shrinking
// toward mu = log(10 * initial_step).
class DualAveraging {
 public:
  DualAveraging(double initial_step, double target_accept, double gamma = 0.05,
                double t0 = 10.0, double kappa = 0.75);

  void update(double accept_stat);
  double current_step() const { return std::exp(log_step_); }
  double averaged_step() const { return std::exp(log_step_avg_); }

 private:
  double mu_, target_, gamma_, t0_, kappa_;
  double log_step_, log_step_avg_, h_bar_;
  long m_ = 0;
};

// Feeds a recorded acceptance-statistic stream through dual averaging and
// returns the step size after each update.
std::vector<double> dual_averaging_adapt(const std::vector<double>& accept_stats,
                                         double target_accept, double initial_step = 1.0);

// Multinomial No-U-Turn sampler with identity mass matrix and step size
// adapted during warmup toward target_accept. Chains run concurrently with
// RNG streams derived from (seed, chain index) and are merged in chain order.
//
// Diagnostics keys: divergences, mean_accept, step_size (per-chain values
// under step_size_chain<k>), max_depth_hit.
PosteriorDraws nuts_sample(const LogDensityTarget& target, const NutsConfig& config);

PosteriorDraws nuts_sample(const NetworkConfig& config, const Dataset& data,
                           const NutsConfig& nuts_config);

}  // namespace bnn::hmc

#endif  // BNN_HMC_HPP
