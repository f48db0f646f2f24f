#ifndef BNN_DRAWS_HPP
#define BNN_DRAWS_HPP

#include <map>
#include <string>

#include <Eigen/Core>

namespace bnn {

// S parameter vectors from either inference engine, with provenance.
struct PosteriorDraws {
  enum class Source { Hmc, Vi };

  Eigen::MatrixXd draws;  // S x P
  Source source = Source::Vi;
  int chains = 1;
  Eigen::Index samples_per_chain = 0;  // rows per chain; S = chains * samples_per_chain
  std::map<std::string, double> diagnostics;
  double wall_time_s = 0.0;

  Eigen::Index n_draws() const { return draws.rows(); }
  Eigen::Index n_params() const { return draws.cols(); }
  int chain_of(Eigen::Index s) const {
    return samples_per_chain > 0 ? static_cast<int>(s / samples_per_chain) : 0;
  }
  void validate() const;
};

std::string to_string(PosteriorDraws::Source s);

}  // namespace bnn

#endif  // BNN_DRAWS_HPP
