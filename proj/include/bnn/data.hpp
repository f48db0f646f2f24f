#ifndef BNN_DATA_HPP
#define BNN_DATA_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bnn/model.hpp"

namespace bnn::data {

enum class SplitKind { Random, ComplementRegion, RelatedRegion, LgbbBeta4 };

struct SplitSpec {
  SplitKind kind = SplitKind::Random;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

// y = sin(10 x) x^2 + eps, x ~ Uniform[x_low, x_high], eps ~ N(0, noise_variance).
Dataset gen_sine_dataset(Eigen::Index n, double x_low, double x_high, double noise_variance,
                         std::uint64_t seed);

// Complement-distributions partition: train = {x in [-1.7, 1.7]}, test = the
// rest. An empty side is an error.
std::pair<Dataset, Dataset> ood_complement_split(const Dataset& dataset);

// Related-distributions task: 500 points with x ~ Uniform[0, 1] and noise
// std 0.05; the extreme-x points are assigned to the 50-point test set so the
// train x-range is strictly inside the test x-range.
std::pair<Dataset, Dataset> gen_related_dataset(std::uint64_t seed);

// CSV with header columns mach, alpha, beta, lift. Range violations are
// reported as warnings, not errors; malformed rows are errors with the line
// number.
Dataset load_lgbb_csv(const std::string& path, std::vector<std::string>* warnings = nullptr);

// Schema-identical stand-in for the proprietary LGBB table: a smooth lift
// surface over (mach, alpha, beta) plus a little observation noise.
Dataset gen_lgbb_surrogate(Eigen::Index n, std::uint64_t seed);

std::pair<Dataset, Dataset> lgbb_splits(const Dataset& dataset, const SplitSpec& spec);

// Per-feature affine transform fitted on the training split only.
struct Standardizer {
  Eigen::VectorXd x_mean, x_std, y_mean, y_std;

  Dataset apply(const Dataset& d) const;
  Eigen::MatrixXd invert_y(const Eigen::MatrixXd& y_scaled) const;
  // Undo the y-transform on an S x (N * output_dim) sample matrix.
  Eigen::MatrixXd invert_y_samples(const Eigen::MatrixXd& samples, int output_dim) const;
  bool operator==(const Standardizer& other) const;
};

std::tuple<Dataset, Dataset, Standardizer> standardize(const Dataset& train,
                                                       const Dataset& test);

}  // namespace bnn::data

#endif  // BNN_DATA_HPP
