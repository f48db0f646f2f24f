#ifndef BNN_DIAGNOSTICS_HPP
#define BNN_DIAGNOSTICS_HPP

#include <vector>

#include <Eigen/Core>

#include "bnn/draws.hpp"

namespace bnn::hmc {

// Rank-normalized split-R-hat and bulk effective sample size, one entry per
// parameter. Constant (zero-variance) parameters are flagged degenerate with
// ess = 0 and rhat = +inf instead of propagating NaNs.
struct ChainDiagnostics {
  Eigen::VectorXd ess;
  Eigen::VectorXd split_rhat;
  std::vector<bool> degenerate;

  double min_ess() const;
  double max_rhat() const;
};

ChainDiagnostics chain_diagnostics(const PosteriorDraws& draws);

}  // namespace bnn::hmc

#endif  // BNN_DIAGNOSTICS_HPP
