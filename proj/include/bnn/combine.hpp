#ifndef BNN_COMBINE_HPP
#define BNN_COMBINE_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "bnn/assess.hpp"
#include "bnn/draws.hpp"
#include "bnn/predictive.hpp"
#include "bnn/rng.hpp"

namespace bnn::combine {

// A point on the K-simplex.
struct WeightVector {
  Eigen::VectorXd w;

  Eigen::Index size() const { return w.size(); }
  void validate(double tol = 1e-12) const;
};

struct CandidateMember {
  std::string model_id;
  PredictiveSamples pred;
  assess::LogLikMatrix loglik;
  assess::ElpdResult elpd;
  PosteriorDraws::Source source = PosteriorDraws::Source::Vi;
};

// K candidate posteriors over the same data and prediction points. Members
// must share N, the prediction grid, and the inference family: HMC and VI
// candidates have incomparable log-predictive scales and are never mixed.
struct CandidateSet {
  std::vector<CandidateMember> members;

  int k() const { return static_cast<int>(members.size()); }
  void validate() const;
};

// Uniform weights 1/K (deep ensembles as trivial BMA).
WeightVector ensemble_weights(int k);

// w_k proportional to exp(elpd_loo^k - regularizer), the regularizer being
// half the root sum of squared centered pointwise elpd contributions
// (log-normal approximation). Log-sum-exp stabilized.
WeightVector pseudo_bma_weights(const std::vector<assess::ElpdResult>& elpds);

// Maximizes (1/N) sum_n log sum_k w_k p_nk over the simplex; p_nk are the
// LOO predictive densities exp(elpd_loo,n^k). Softmax-reparameterized
// gradient ascent with backtracking line search from the uniform point;
// converged when the objective gains less than 1e-10 over 50 iterations.
WeightVector stacking_weights(const Eigen::MatrixXd& loo_densities);

double stacking_objective(const Eigen::MatrixXd& loo_densities, const Eigen::VectorXd& w);

// Mixture predictive by resampling: each output draw picks member
// k ~ Categorical(w) and then one of its stored draws uniformly; signal and
// observation streams reuse the same (k, draw) pair.
PredictiveSamples combine_predictive(const CandidateSet& set, const WeightVector& w,
                                     Eigen::Index n_out, RngStream& rng);

// Closed-form mixture moments: mu = sum w_k mu_k,
// var = sum w_k (var_k + mu_k^2) - mu^2.
std::pair<double, double> mixture_moments(const Eigen::VectorXd& means,
                                          const Eigen::VectorXd& vars,
                                          const WeightVector& w);

}  // namespace bnn::combine

#endif  // BNN_COMBINE_HPP
