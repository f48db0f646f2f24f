#include "bnn/draws.hpp"

#include "bnn/errors.hpp"

namespace bnn {

void PosteriorDraws::validate() const {
  if (draws.rows() < 1) throw DimensionError("PosteriorDraws is empty");
  if (!draws.allFinite()) throw NumericError("PosteriorDraws contains non-finite values");
  if (chains < 1) throw DimensionError("PosteriorDraws chain count must be >= 1");
  if (samples_per_chain > 0 && chains * samples_per_chain != draws.rows())
    throw DimensionError("PosteriorDraws rows != chains * samples_per_chain");
}

std::string to_string(PosteriorDraws::Source s) {
  return s == PosteriorDraws::Source::Hmc ? "hmc" : "vi";
}

}  // namespace bnn
