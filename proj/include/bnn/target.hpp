#ifndef BNN_TARGET_HPP
#define BNN_TARGET_HPP

#include <functional>
#include <memory>

#include <Eigen/Core>

#include "bnn/model.hpp"

namespace bnn {

// An unnormalized log density with gradient. Both inference engines run
// against this interface; the BNN posterior is one implementation, and the
// test suites plug in analytic targets (Gaussians, funnels, priors).
class LogDensityTarget {
 public:
  virtual ~LogDensityTarget() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double log_density(const Eigen::VectorXd& theta) const = 0;
  // Returns the log density and fills grad (resized as needed).
  virtual double log_density_grad(const Eigen::VectorXd& theta,
                                  Eigen::VectorXd& grad) const = 0;
};

// The BNN log posterior as a target. Holds references; the config and data
// must outlive the target.
class BnnPosterior final : public LogDensityTarget {
 public:
  BnnPosterior(const NetworkConfig& config, const Dataset& data)
      : config_(config), data_(data) {
    config.validate();
    data.validate();
  }

  Eigen::Index dim() const override { return config_.param_count(); }

  double log_density(const Eigen::VectorXd& theta) const override {
    return log_posterior(config_, ParamVector(theta), data_);
  }

  double log_density_grad(const Eigen::VectorXd& theta,
                          Eigen::VectorXd& grad) const override {
    return log_posterior_with_grad(config_, ParamVector(theta), data_, grad);
  }

  const NetworkConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }

 private:
  const NetworkConfig& config_;
  const Dataset& data_;
};

// Ad-hoc target from closures; handy for analytic test densities.
class FunctionTarget final : public LogDensityTarget {
 public:
  using ValueFn = std::function<double(const Eigen::VectorXd&)>;
  using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  FunctionTarget(Eigen::Index dim, ValueFn value, GradFn grad)
      : dim_(dim), value_(std::move(value)), grad_(std::move(grad)) {}

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& theta) const override { return value_(theta); }
  double log_density_grad(const Eigen::VectorXd& theta,
                          Eigen::VectorXd& grad) const override {
    grad = grad_(theta);
    return value_(theta);
  }

 private:
  Eigen::Index dim_;
  ValueFn value_;
  GradFn grad_;
};

}  // namespace bnn

#endif  // BNN_TARGET_HPP
