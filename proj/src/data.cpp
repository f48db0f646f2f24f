#include "bnn/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn::data {

void SplitSpec::validate() const {
  if (kind == SplitKind::Random && (train_fraction <= 0.0 || train_fraction >= 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
}

Dataset gen_sine_dataset(Eigen::Index n, double x_low, double x_high, double noise_variance,
                         std::uint64_t seed) {
  if (n < 1) throw ConfigError("dataset size must be >= 1");
  if (x_high <= x_low) throw ConfigError("x_high must exceed x_low");
  if (noise_variance < 0.0) throw ConfigError("noise_variance must be nonnegative");
  RngStream rng = RngStream::derive(seed, 0);
  const double noise_std = std::sqrt(noise_variance);
  Dataset d;
  d.x.resize(n, 1);
  d.y.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = rng.uniform(x_low, x_high);
    d.x(i, 0) = x;
    d.y(i, 0) = std::sin(10.0 * x) * x * x + noise_std * rng.normal();
  }
  d.meta["generator"] = "sine";
  d.meta["seed"] = std::to_string(seed);
  return d;
}

std::pair<Dataset, Dataset> ood_complement_split(const Dataset& dataset) {
  dataset.validate();
  if (dataset.x.cols() != 1)
    throw DimensionError("complement split expects one-dimensional inputs");
  constexpr double kInnerLo = -1.7, kInnerHi = 1.7;
  std::vector<Eigen::Index> train_idx, test_idx;
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    const double x = dataset.x(i, 0);
    (x >= kInnerLo && x <= kInnerHi ? train_idx : test_idx).push_back(i);
  }
  if (train_idx.empty() || test_idx.empty())
    throw ConfigError("complement split produced an empty side");
  auto take = [&](const std::vector<Eigen::Index>& idx, const char* tag) {
    Dataset d;
    d.x.resize(static_cast<Eigen::Index>(idx.size()), dataset.x.cols());
    d.y.resize(static_cast<Eigen::Index>(idx.size()), dataset.y.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      d.x.row(static_cast<Eigen::Index>(k)) = dataset.x.row(idx[k]);
      d.y.row(static_cast<Eigen::Index>(k)) = dataset.y.row(idx[k]);
    }
    d.meta = dataset.meta;
    d.meta["split"] = tag;
    return d;
  };
  return {take(train_idx, "complement-train"), take(test_idx, "complement-test")};
}

std::pair<Dataset, Dataset> gen_related_dataset(std::uint64_t seed) {
  // Train on an inner slice of [0, 1]; test on the full interval, with one
  // point forced into each margin so the test x-range strictly contains the
  // train x-range.
  constexpr Eigen::Index kTrain = 450, kTest = 50;
  constexpr double kMargin = 0.10;
  RngStream rng = RngStream::derive(seed, 0);
  const double noise_std = 0.05;

  auto emit = [&](Dataset& d, Eigen::Index i, double x) {
    d.x(i, 0) = x;
    d.y(i, 0) = std::sin(10.0 * x) * x * x + noise_std * rng.normal();
  };

  Dataset train, test;
  train.x.resize(kTrain, 1);
  train.y.resize(kTrain, 1);
  for (Eigen::Index i = 0; i < kTrain; ++i)
    emit(train, i, rng.uniform(kMargin, 1.0 - kMargin));

  test.x.resize(kTest, 1);
  test.y.resize(kTest, 1);
  emit(test, 0, rng.uniform(0.0, kMargin));
  emit(test, 1, rng.uniform(1.0 - kMargin, 1.0));
  for (Eigen::Index i = 2; i < kTest; ++i) emit(test, i, rng.uniform(0.0, 1.0));

  train.meta["split"] = "related-train";
  test.meta["split"] = "related-test";
  train.meta["seed"] = test.meta["seed"] = std::to_string(seed);
  return {train, test};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    // Trim surrounding whitespace.
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

Dataset load_lgbb_csv(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open LGBB CSV: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("LGBB CSV is empty: " + path);
  const auto header = split_csv_line(line);
  const std::vector<std::string> wanted = {"mach", "alpha", "beta", "lift"};
  std::vector<int> col(wanted.size(), -1);
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == wanted[w]) col[w] = static_cast<int>(h);
    if (col[w] < 0) throw ConfigError("LGBB CSV missing column '" + wanted[w] + "'");
  }

  std::vector<std::array<double, 4>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    std::array<double, 4> row{};
    for (std::size_t w = 0; w < wanted.size(); ++w) {
      if (static_cast<std::size_t>(col[w]) >= fields.size())
        throw ConfigError("LGBB CSV line " + std::to_string(line_no) + ": too few fields");
      try {
        std::size_t used = 0;
        row[w] = std::stod(fields[col[w]], &used);
        if (used != fields[col[w]].size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        throw ConfigError("LGBB CSV line " + std::to_string(line_no) +
                          ": cannot parse field '" + wanted[w] + "'");
      }
    }
    const double mach = row[0], alpha = row[1], beta = row[2];
    if (warnings) {
      auto warn = [&](const std::string& msg) {
        warnings->push_back("line " + std::to_string(line_no) + ": " + msg);
      };
      if (mach < 0.0 || mach > 6.0) warn("mach outside [0, 6]");
      if (alpha < -5.0 || alpha > 30.0) warn("alpha outside [-5, 30]");
      const double betas[] = {0.0, 0.5, 1.0, 2.0, 3.0, 4.0};
      bool known = false;
      for (double b : betas)
        if (beta == b) known = true;
      if (!known) warn("beta not in {0, 0.5, 1, 2, 3, 4}");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw ConfigError("LGBB CSV has no data rows: " + path);

  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), 3);
  d.y.resize(static_cast<Eigen::Index>(rows.size()), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.x(static_cast<Eigen::Index>(i), 0) = rows[i][0];
    d.x(static_cast<Eigen::Index>(i), 1) = rows[i][1];
    d.x(static_cast<Eigen::Index>(i), 2) = rows[i][2];
    d.y(static_cast<Eigen::Index>(i), 0) = rows[i][3];
  }
  d.meta["source"] = path;
  return d;
}

Dataset gen_lgbb_surrogate(Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("surrogate size must be >= 1");
  RngStream rng = RngStream::derive(seed, 0);
  const double betas[] = {0.0, 0.5, 1.0, 2.0, 3.0, 4.0};
  Dataset d;
  d.x.resize(n, 3);
  d.y.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mach = rng.uniform(0.0, 6.0);
    const double alpha = rng.uniform(-5.0, 30.0);
    const double beta = betas[rng.uniform_index(6)];
    // Smooth invented lift surface: rises with angle of attack, dips through
    // the transonic regime, mild sideslip interaction.
    const double transonic = std::exp(-2.0 * (mach - 1.0) * (mach - 1.0));
    const double lift = 0.02 * alpha * (1.0 + 0.4 * std::tanh(mach - 1.0)) -
                        0.15 * transonic * (1.0 + 0.1 * alpha) +
                        0.05 * std::sin(0.8 * mach) - 0.03 * beta * transonic +
                        0.01 * beta * std::cos(0.5 * mach);
    d.x(i, 0) = mach;
    d.x(i, 1) = alpha;
    d.x(i, 2) = beta;
    d.y(i, 0) = lift + 0.01 * rng.normal();
  }
  d.meta["generator"] = "lgbb-surrogate";
  d.meta["seed"] = std::to_string(seed);
  return d;
}

std::pair<Dataset, Dataset> lgbb_splits(const Dataset& dataset, const SplitSpec& spec) {
  dataset.validate();
  spec.validate();
  auto take = [&](const std::vector<Eigen::Index>& idx, const char* tag) {
    Dataset d;
    d.x.resize(static_cast<Eigen::Index>(idx.size()), dataset.x.cols());
    d.y.resize(static_cast<Eigen::Index>(idx.size()), dataset.y.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      d.x.row(static_cast<Eigen::Index>(k)) = dataset.x.row(idx[k]);
      d.y.row(static_cast<Eigen::Index>(k)) = dataset.y.row(idx[k]);
    }
    d.meta = dataset.meta;
    d.meta["split"] = tag;
    return d;
  };

  if (spec.kind == SplitKind::LgbbBeta4) {
    if (dataset.x.cols() != 3)
      throw DimensionError("beta4 split expects (mach, alpha, beta) inputs");
    std::vector<Eigen::Index> train_idx, test_idx;
    for (Eigen::Index i = 0; i < dataset.n(); ++i)
      (dataset.x(i, 2) == 4.0 ? test_idx : train_idx).push_back(i);
    if (train_idx.empty() || test_idx.empty())
      throw ConfigError("beta4 split produced an empty side");
    return {take(train_idx, "beta4-train"), take(test_idx, "beta4-test")};
  }
  if (spec.kind != SplitKind::Random)
    throw ConfigError("lgbb_splits supports Random and LgbbBeta4 kinds");

  std::vector<Eigen::Index> order(dataset.n());
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream::derive(spec.seed, 2);
  // Fisher-Yates with the library stream.
  for (Eigen::Index i = dataset.n() - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[i], order[j]);
  }
  const auto n_train = static_cast<Eigen::Index>(
      std::floor(spec.train_fraction * static_cast<double>(dataset.n())));
  if (n_train < 1 || n_train >= dataset.n())
    throw ConfigError("random split fractions leave an empty side");
  std::vector<Eigen::Index> train_idx(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> test_idx(order.begin() + n_train, order.end());
  return {take(train_idx, "random-train"), take(test_idx, "random-test")};
}

Dataset Standardizer::apply(const Dataset& d) const {
  Dataset out = d;
  for (Eigen::Index c = 0; c < out.x.cols(); ++c)
    out.x.col(c) = (out.x.col(c).array() - x_mean[c]) / x_std[c];
  for (Eigen::Index c = 0; c < out.y.cols(); ++c)
    out.y.col(c) = (out.y.col(c).array() - y_mean[c]) / y_std[c];
  return out;
}

Eigen::MatrixXd Standardizer::invert_y(const Eigen::MatrixXd& y_scaled) const {
  Eigen::MatrixXd out = y_scaled;
  for (Eigen::Index c = 0; c < out.cols(); ++c)
    out.col(c) = out.col(c).array() * y_std[c] + y_mean[c];
  return out;
}

Eigen::MatrixXd Standardizer::invert_y_samples(const Eigen::MatrixXd& samples,
                                               int output_dim) const {
  Eigen::MatrixXd out = samples;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const Eigen::Index j = c % output_dim;
    out.col(c) = out.col(c).array() * y_std[j] + y_mean[j];
  }
  return out;
}

bool Standardizer::operator==(const Standardizer& other) const {
  return x_mean == other.x_mean && x_std == other.x_std && y_mean == other.y_mean &&
         y_std == other.y_std;
}

std::tuple<Dataset, Dataset, Standardizer> standardize(const Dataset& train,
                                                       const Dataset& test) {
  train.validate();
  test.validate();
  if (train.x.cols() != test.x.cols() || train.y.cols() != test.y.cols())
    throw DimensionError("train and test feature counts differ");

  Standardizer s;
  auto fit = [&](const Eigen::MatrixXd& m, Eigen::VectorXd& mean, Eigen::VectorXd& std) {
    mean.resize(m.cols());
    std.resize(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      mean[c] = m.col(c).mean();
      const double var =
          (m.col(c).array() - mean[c]).square().sum() / std::max<Eigen::Index>(1, m.rows() - 1);
      std[c] = std::sqrt(var);
      if (std[c] <= 0.0) std[c] = 1.0;  // constant feature: shift only
    }
  };
  fit(train.x, s.x_mean, s.x_std);
  fit(train.y, s.y_mean, s.y_std);
  return {s.apply(train), s.apply(test), s};
}

}  // namespace bnn::data
