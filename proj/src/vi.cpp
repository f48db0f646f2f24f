#include "bnn/vi.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include "bnn/errors.hpp"
#include "bnn/stats.hpp"

namespace bnn::vi {

void VariationalParams::validate() const {
  if (mu.size() != log_std.size())
    throw DimensionError("variational mu and log_std lengths differ");
  if (!mu.allFinite() || !log_std.allFinite())
    throw NumericError("variational parameters are not finite");
}

void ViConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (mc_samples_per_step < 1) throw ConfigError("mc_samples_per_step must be >= 1");
}

VariationalParams init_variational(Eigen::Index dim, InitMode mode, RngStream& rng) {
  VariationalParams q;
  q.mu = mode == InitMode::ToFeasible ? rng.uniform_vector(dim, -2.0, 2.0)
                                      : Eigen::VectorXd::Zero(dim);
  q.log_std = Eigen::VectorXd::Constant(dim, -2.0);
  return q;
}

double entropy(const VariationalParams& q) {
  const double d = static_cast<double>(q.dim());
  return q.log_std.sum() + 0.5 * d * (1.0 + stats::log_2pi);
}

double elbo_estimate(const VariationalParams& q, const LogDensityTarget& target,
                     int mc_samples, RngStream& rng) {
  q.validate();
  if (mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
  const Eigen::VectorXd sd = q.stddev();
  double acc = 0.0;
  for (int i = 0; i < mc_samples; ++i) {
    const Eigen::VectorXd eps = rng.normal_vector(q.dim());
    acc += target.log_density(q.mu + sd.cwiseProduct(eps));
  }
  const double value = acc / mc_samples + entropy(q);
  if (!std::isfinite(value)) throw NumericError("ELBO estimate is not finite");
  return value;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_elbo(const VariationalParams& q,
                                                      const LogDensityTarget& target,
                                                      int mc_samples, RngStream& rng) {
  q.validate();
  if (mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
  const Eigen::VectorXd sd = q.stddev();
  Eigen::VectorXd g_mu = Eigen::VectorXd::Zero(q.dim());
  Eigen::VectorXd g_ls = Eigen::VectorXd::Zero(q.dim());
  Eigen::VectorXd grad;
  for (int i = 0; i < mc_samples; ++i) {
    const Eigen::VectorXd eps = rng.normal_vector(q.dim());
    target.log_density_grad(q.mu + sd.cwiseProduct(eps), grad);
    g_mu += grad;
    g_ls += grad.cwiseProduct(sd.cwiseProduct(eps));
  }
  g_mu /= mc_samples;
  g_ls /= mc_samples;
  g_ls.array() += 1.0;  // entropy gradient w.r.t. log_std is 1 per coordinate
  return {std::move(g_mu), std::move(g_ls)};
}

namespace {

// One Adam ascent step (maximization, so the update adds).
struct Adam {
  Eigen::VectorXd m, v;
  double beta1, beta2, eps;
  long t = 0;

  Adam(Eigen::Index dim, const ViConfig& cfg)
      : m(Eigen::VectorXd::Zero(dim)),
        v(Eigen::VectorXd::Zero(dim)),
        beta1(cfg.adam_beta1),
        beta2(cfg.adam_beta2),
        eps(cfg.adam_eps) {}

  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    x.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace

AdviFit fit_advi(const LogDensityTarget& target, const ViConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  RngStream rng = RngStream::derive(cfg.seed, 0);

  const Eigen::Index dim = target.dim();
  VariationalParams q = init_variational(dim, cfg.init_mode, rng);

  AdviFit fit;
  fit.initial_mu = q.mu;

  Adam adam_mu(dim, cfg), adam_ls(dim, cfg);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dim);
  Eigen::VectorXd grad;
  std::deque<double> window;  // last 10 per-step ELBO estimates

  constexpr int kRecordEvery = 100;
  constexpr std::size_t kWindow = 10;

  double last_smoothed = 0.0;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const Eigen::VectorXd sd = q.stddev();
    Eigen::VectorXd g_mu = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd g_ls = Eigen::VectorXd::Zero(dim);
    double logp_acc = 0.0;
    for (int i = 0; i < cfg.mc_samples_per_step; ++i) {
      const Eigen::VectorXd eps = rng.normal_vector(dim);
      logp_acc += target.log_density_grad(q.mu + sd.cwiseProduct(eps), grad);
      g_mu += grad;
      g_ls += grad.cwiseProduct(sd.cwiseProduct(eps));
    }
    g_mu /= cfg.mc_samples_per_step;
    g_ls /= cfg.mc_samples_per_step;
    g_ls += ones;

    adam_mu.step(q.mu, g_mu, cfg.learning_rate);
    adam_ls.step(q.log_std, g_ls, cfg.learning_rate);
    if (!q.mu.allFinite() || !q.log_std.allFinite())
      throw NumericError("ADVI diverged: variational state is not finite", iter);

    const double elbo = logp_acc / cfg.mc_samples_per_step + entropy(q);
    window.push_back(elbo);
    if (window.size() > kWindow) window.pop_front();
    if (iter % kRecordEvery == 0 || iter == cfg.iterations) {
      double s = 0.0;
      for (double e : window) s += e;
      last_smoothed = s / static_cast<double>(window.size());
      if (iter % kRecordEvery == 0) fit.trace.push_back({iter, last_smoothed});
    }
  }

  fit.params = std::move(q);
  fit.final_elbo = last_smoothed;
  fit.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return fit;
}

double elbo_estimate(const VariationalParams& q, const NetworkConfig& config,
                     const Dataset& data, int mc_samples, RngStream& rng) {
  const BnnPosterior target(config, data);
  return elbo_estimate(q, target, mc_samples, rng);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> grad_elbo(const VariationalParams& q,
                                                      const NetworkConfig& config,
                                                      const Dataset& data, int mc_samples,
                                                      RngStream& rng) {
  const BnnPosterior target(config, data);
  return grad_elbo(q, target, mc_samples, rng);
}

AdviFit fit_advi(const NetworkConfig& config, const Dataset& data, const ViConfig& vi_config) {
  const BnnPosterior target(config, data);
  return fit_advi(target, vi_config);
}

PosteriorDraws sample_variational(const VariationalParams& q, Eigen::Index n_draws,
                                  RngStream& rng) {
  q.validate();
  if (n_draws < 1) throw ConfigError("number of draws must be >= 1");
  const Eigen::VectorXd sd = q.stddev();
  PosteriorDraws out;
  out.draws.resize(n_draws, q.dim());
  for (Eigen::Index s = 0; s < n_draws; ++s) {
    const Eigen::VectorXd eps = rng.normal_vector(q.dim());
    out.draws.row(s) = (q.mu + sd.cwiseProduct(eps)).transpose();
  }
  out.source = PosteriorDraws::Source::Vi;
  out.chains = 1;
  out.samples_per_chain = n_draws;
  return out;
}

}  // namespace bnn::vi
