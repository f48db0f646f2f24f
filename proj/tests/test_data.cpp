#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bnn/data.hpp"
#include "bnn/errors.hpp"

using namespace bnn;
using namespace bnn::data;

TEST_CASE("sine generator: zero noise reproduces the curve exactly") {
  const Dataset d = gen_sine_dataset(50, 0.0, 2.0, 0.0, 11);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const double x = d.x(i, 0);
    CHECK(d.y(i, 0) == doctest::Approx(std::sin(10.0 * x) * x * x).epsilon(1e-14));
    CHECK(x >= 0.0);
    CHECK(x <= 2.0);
  }
}

TEST_CASE("sine generator: noise moments match the requested variance") {
  const Eigen::Index n = 100000;
  const Dataset d = gen_sine_dataset(n, 0.0, 2.0, 0.25, 12);
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = d.x(i, 0);
    eps[i] = d.y(i, 0) - std::sin(10.0 * x) * x * x;
  }
  const double mean = eps.mean();
  const double var = (eps.array() - mean).square().sum() / (n - 1);
  CHECK(std::abs(mean) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
  // SE of the sample variance of a Gaussian: var * sqrt(2/(n-1)).
  CHECK(std::abs(var - 0.25) < 3.0 * 0.25 * std::sqrt(2.0 / (n - 1.0)));
}

TEST_CASE("sine generator: deterministic given seed, distinct across seeds") {
  const Dataset a = gen_sine_dataset(100, 0.0, 2.0, 0.25, 5);
  const Dataset b = gen_sine_dataset(100, 0.0, 2.0, 0.25, 5);
  const Dataset c = gen_sine_dataset(100, 0.0, 2.0, 0.25, 6);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x != c.x);
  CHECK(a.y.allFinite());
}

TEST_CASE("complement split: region membership and exact partition") {
  const Dataset d = gen_sine_dataset(500, -2.8, 1.9, 0.25, 7);
  const auto [train, test] = ood_complement_split(d);
  CHECK(train.n() + test.n() == 500);
  for (Eigen::Index i = 0; i < train.n(); ++i) {
    CHECK(train.x(i, 0) >= -1.7);
    CHECK(train.x(i, 0) <= 1.7);
  }
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    const double x = test.x(i, 0);
    CHECK((x < -1.7 || x > 1.7));
  }
  // Printed sizes: about 370 of 500 land in the inner region.
  CHECK(train.n() > 320);
  CHECK(train.n() < 410);

  // Membership spot checks from the printed region bounds.
  Eigen::Index in_train = 0, at_18 = 0, at_m2 = 0;
  Dataset probe;
  probe.x.resize(3, 1);
  probe.x << 0.0, 1.8, -2.0;
  probe.y = Eigen::MatrixXd::Zero(3, 1);
  const auto [ptrain, ptest] = ood_complement_split(probe);
  CHECK(ptrain.n() == 1);
  CHECK(ptrain.x(0, 0) == 0.0);
  CHECK(ptest.n() == 2);
  (void)in_train;
  (void)at_18;
  (void)at_m2;
}

TEST_CASE("complement split: an empty side is an error") {
  Dataset inner;
  inner.x = Eigen::MatrixXd::Zero(5, 1);
  inner.y = Eigen::MatrixXd::Zero(5, 1);
  CHECK_THROWS_AS(ood_complement_split(inner), ConfigError);
}

TEST_CASE("related dataset: sizes, noise scale, and strict inclusion") {
  const auto [train, test] = gen_related_dataset(21);
  CHECK(train.n() == 450);
  CHECK(test.n() == 50);
  CHECK(train.x.minCoeff() > test.x.minCoeff());
  CHECK(train.x.maxCoeff() < test.x.maxCoeff());

  // Noise std 0.05: pool both splits and check the sample std.
  Eigen::VectorXd eps(500);
  Eigen::Index at = 0;
  for (const Dataset* d : {&train, &test}) {
    for (Eigen::Index i = 0; i < d->n(); ++i, ++at) {
      const double x = d->x(i, 0);
      eps[at] = d->y(i, 0) - std::sin(10.0 * x) * x * x;
    }
  }
  const double sd = std::sqrt((eps.array() - eps.mean()).square().sum() / 499.0);
  CHECK(std::abs(sd - 0.05) < 3.0 * 0.05 / std::sqrt(2.0 * 499.0));
}

TEST_CASE("lgbb csv: well-formed fixture parses; violations warn; junk errors") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "bnn_test_lgbb";
  fs::create_directories(dir);

  {
    std::ofstream out(dir / "ok.csv");
    out << "mach,alpha,beta,lift\n"
        << "0.5,10.0,0.0,0.31\n"
        << "3.2,25.0,4.0,0.52\n"
        << "6.0,-5.0,2.0,-0.11\n";
  }
  std::vector<std::string> warnings;
  const Dataset d = load_lgbb_csv((dir / "ok.csv").string(), &warnings);
  CHECK(d.n() == 3);
  CHECK(d.x.cols() == 3);
  CHECK(warnings.empty());
  CHECK(d.y(1, 0) == doctest::Approx(0.52));

  {
    std::ofstream out(dir / "warn.csv");
    out << "mach,alpha,beta,lift\n"
        << "0.5,10.0,7.0,0.31\n";  // beta = 7 is outside the catalog
  }
  warnings.clear();
  const Dataset w = load_lgbb_csv((dir / "warn.csv").string(), &warnings);
  CHECK(w.n() == 1);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("beta") != std::string::npos);

  {
    std::ofstream out(dir / "bad.csv");
    out << "mach,alpha,beta,lift\n"
        << "0.5,ten,0.0,0.31\n";
  }
  try {
    load_lgbb_csv((dir / "bad.csv").string());
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  {
    std::ofstream out(dir / "missing.csv");
    out << "mach,alpha,lift\n0.5,10.0,0.3\n";
  }
  CHECK_THROWS_AS(load_lgbb_csv((dir / "missing.csv").string()), ConfigError);
}

TEST_CASE("lgbb surrogate: schema and ranges mirror the real table") {
  const Dataset d = gen_lgbb_surrogate(3167, 13);
  CHECK(d.n() == 3167);
  CHECK(d.x.cols() == 3);
  CHECK(d.y.cols() == 1);
  CHECK(d.x.col(0).minCoeff() >= 0.0);
  CHECK(d.x.col(0).maxCoeff() <= 6.0);
  CHECK(d.x.col(1).minCoeff() >= -5.0);
  CHECK(d.x.col(1).maxCoeff() <= 30.0);
  std::vector<double> betas = {0.0, 0.5, 1.0, 2.0, 3.0, 4.0};
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    bool known = false;
    for (double b : betas)
      if (d.x(i, 2) == b) known = true;
    CHECK(known);
  }
  CHECK(d.y.allFinite());
}

TEST_CASE("lgbb splits: beta4 partition and random 80/20") {
  const Dataset d = gen_lgbb_surrogate(1200, 14);

  SplitSpec beta4;
  beta4.kind = SplitKind::LgbbBeta4;
  const auto [b4_train, b4_test] = lgbb_splits(d, beta4);
  CHECK(b4_train.n() + b4_test.n() == 1200);
  for (Eigen::Index i = 0; i < b4_test.n(); ++i) CHECK(b4_test.x(i, 2) == 4.0);
  for (Eigen::Index i = 0; i < b4_train.n(); ++i) CHECK(b4_train.x(i, 2) != 4.0);

  SplitSpec random;
  random.kind = SplitKind::Random;
  random.train_fraction = 0.8;
  random.seed = 15;
  const auto [r_train, r_test] = lgbb_splits(d, random);
  CHECK(r_train.n() == 960);
  CHECK(r_test.n() == 240);

  const auto [again_train, again_test] = lgbb_splits(d, random);
  CHECK(r_train.x == again_train.x);
  CHECK(r_test.y == again_test.y);
}

TEST_CASE("standardize: train moments, round trip, shared transform") {
  const Dataset big = gen_lgbb_surrogate(400, 16);
  SplitSpec spec;
  spec.kind = SplitKind::Random;
  spec.seed = 17;
  const auto [train, test] = lgbb_splits(big, spec);
  const auto [strain, stest, tf] = standardize(train, test);

  for (Eigen::Index c = 0; c < strain.x.cols(); ++c) {
    CHECK(std::abs(strain.x.col(c).mean()) < 1e-12);
    const double sd = std::sqrt(
        (strain.x.col(c).array() - strain.x.col(c).mean()).square().sum() /
        (strain.n() - 1));
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(std::abs(strain.y.col(0).mean()) < 1e-12);

  // inverse(transform(y)) = y.
  const Eigen::MatrixXd back = tf.invert_y(stest.y);
  CHECK((back - test.y).cwiseAbs().maxCoeff() < 1e-12);

  // The test split used the train statistics: re-fitting on test would differ.
  const auto [strain2, stest2, tf2] = standardize(train, train);
  CHECK(tf == tf2);
}
