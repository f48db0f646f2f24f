#include "bnn/hmc.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <limits>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"
#include "bnn/stats.hpp"

namespace bnn::hmc {

void NutsConfig::validate() const {
  if (warmup < 1) throw ConfigError("warmup must be >= 1");
  if (samples < 1) throw ConfigError("samples must be >= 1");
  if (target_accept <= 0.0 || target_accept >= 1.0)
    throw ConfigError("target_accept must lie in (0, 1)");
  if (max_tree_depth < 1) throw ConfigError("max_tree_depth must be >= 1");
  if (chains < 1) throw ConfigError("chains must be >= 1");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> leapfrog(const Eigen::VectorXd& position,
                                                     const Eigen::VectorXd& momentum,
                                                     double step_size, const GradFn& grad) {
  Eigen::VectorXd r = momentum + 0.5 * step_size * grad(position);
  Eigen::VectorXd q = position + step_size * r;
  r += 0.5 * step_size * grad(q);
  return {std::move(q), std::move(r)};
}

DualAveraging::DualAveraging(double initial_step, double target_accept, double gamma,
                             double t0, double kappa)
    : mu_(std::log(10.0 * initial_step)),
      target_(target_accept),
      gamma_(gamma),
      t0_(t0),
      kappa_(kappa),
      log_step_(std::log(initial_step)),
      log_step_avg_(std::log(initial_step)),
      h_bar_(0.0) {}

void DualAveraging::update(double accept_stat) {
  if (!std::isfinite(accept_stat)) accept_stat = 0.0;
  ++m_;
  const double m = static_cast<double>(m_);
  const double w = 1.0 / (m + t0_);
  h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_stat);
  log_step_ = mu_ - std::sqrt(m) / gamma_ * h_bar_;
  const double eta = std::pow(m, -kappa_);
  log_step_avg_ = eta * log_step_ + (1.0 - eta) * log_step_avg_;
}

std::vector<double> dual_averaging_adapt(const std::vector<double>& accept_stats,
                                         double target_accept, double initial_step) {
  DualAveraging da(initial_step, target_accept);
  std::vector<double> schedule;
  schedule.reserve(accept_stats.size());
  for (double a : accept_stats) {
    da.update(a);
    schedule.push_back(da.current_step());
  }
  return schedule;
}

namespace {

constexpr double kDivergenceThreshold = 1000.0;

// Phase-space point with cached gradient and log density.
struct Phase {
  Eigen::VectorXd theta;
  Eigen::VectorXd r;
  Eigen::VectorXd grad;
  double logp = 0.0;

  double joint() const { return logp - 0.5 * r.squaredNorm(); }
};

struct TreeStats {
  double log_sum_w = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd proposal;
  // First point created inside the subtree; with the final edge these span
  // the subtree for the u-turn test.
  Eigen::VectorXd near_theta, near_r;
  double sum_metro = 0.0;
  long n_leapfrog = 0;
  bool divergent = false;
  bool turning = false;
};

class NutsChain {
 public:
  NutsChain(const LogDensityTarget& target, const NutsConfig& cfg, int chain_index)
      : target_(target), cfg_(cfg), rng_(RngStream::derive(cfg.seed, chain_index)) {}

  // Runs warmup + sampling; returns samples x dim matrix.
  Eigen::MatrixXd run(double& adapted_step, long& divergences, double& mean_accept,
                      long& max_depth_hit) {
    const Eigen::Index dim = target_.dim();
    Phase z;
    initialize(z, dim);

    double eps = find_reasonable_step(z);
    DualAveraging da(eps, cfg_.target_accept);

    Eigen::MatrixXd out(cfg_.samples, dim);
    divergences = 0;
    max_depth_hit = 0;
    double accept_acc = 0.0;
    for (int m = 1; m <= cfg_.warmup + cfg_.samples; ++m) {
      const Transition t = transition(z, eps);
      if (m <= cfg_.warmup) {
        da.update(t.accept_stat);
        eps = m == cfg_.warmup ? da.averaged_step() : da.current_step();
      } else {
        const int s = m - cfg_.warmup - 1;
        out.row(s) = z.theta.transpose();
        accept_acc += t.accept_stat;
        if (t.divergent) ++divergences;
        max_depth_hit = std::max(max_depth_hit, static_cast<long>(t.depth));
      }
    }
    adapted_step = eps;
    mean_accept = accept_acc / cfg_.samples;
    return out;
  }

 private:
  struct Transition {
    double accept_stat = 0.0;
    bool divergent = false;
    int depth = 0;
  };

  void initialize(Phase& z, Eigen::Index dim) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      z.theta = rng_.uniform_vector(dim, -2.0, 2.0);
      double value;
      try {
        value = target_.log_density_grad(z.theta, z.grad);
      } catch (const NumericError&) {
        continue;
      }
      if (std::isfinite(value) && z.grad.allFinite()) {
        z.logp = value;
        return;
      }
    }
    throw NumericError(
        "NUTS initialization failed: log posterior not finite after 100 retries");
  }

  // Evaluates the target, mapping numeric failures to -inf (divergent region).
  double eval(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    double value;
    try {
      value = target_.log_density_grad(theta, grad);
    } catch (const NumericError&) {
      grad = Eigen::VectorXd::Zero(theta.size());
      return -std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(value) || !grad.allFinite()) {
      grad.setZero();
      return -std::numeric_limits<double>::infinity();
    }
    return value;
  }

  // One leapfrog step from `from` in direction dir; uses cached gradients.
  Phase step_from(const Phase& from, double eps, int dir) {
    const double h = dir * eps;
    Phase next;
    Eigen::VectorXd r_half = from.r + 0.5 * h * from.grad;
    next.theta = from.theta + h * r_half;
    next.logp = eval(next.theta, next.grad);
    next.r = r_half + 0.5 * h * next.grad;
    return next;
  }

  double find_reasonable_step(const Phase& z0) {
    double eps = 1.0;
    Phase z = z0;
    z.r = rng_.normal_vector(z0.theta.size());
    const double joint0 = z.joint();
    auto delta_at = [&](double e) {
      const Phase trial = step_from(z, e, +1);
      const double d = trial.joint() - joint0;
      return std::isfinite(d) ? d : -std::numeric_limits<double>::infinity();
    };
    double delta = delta_at(eps);
    const double dir = delta > std::log(0.5) ? 1.0 : -1.0;
    for (int i = 0; i < 100; ++i) {
      if (dir * delta <= -dir * std::log(2.0)) break;
      eps *= std::pow(2.0, dir);
      if (eps < 1e-10 || eps > 1e10)
        throw NumericError("NUTS step size search diverged");
      delta = delta_at(eps);
    }
    return eps;
  }

  static bool is_turning(const Eigen::VectorXd& theta_minus, const Eigen::VectorXd& r_minus,
                         const Eigen::VectorXd& theta_plus, const Eigen::VectorXd& r_plus) {
    const Eigen::VectorXd span = theta_plus - theta_minus;
    return span.dot(r_minus) < 0.0 || span.dot(r_plus) < 0.0;
  }

  static bool is_turning(const Phase& minus, const Phase& plus) {
    return is_turning(minus.theta, minus.r, plus.theta, plus.r);
  }

  // Builds a subtree of 2^depth leapfrog steps extending from `edge` in
  // direction dir. On return, `edge` holds the new outermost point.
  TreeStats build_tree(int depth, Phase& edge, int dir, double eps, double joint0) {
    if (depth == 0) {
      edge = step_from(edge, eps, dir);
      const double delta = edge.joint() - joint0;
      TreeStats t;
      t.log_sum_w = delta;
      t.proposal = edge.theta;
      t.near_theta = edge.theta;
      t.near_r = edge.r;
      t.n_leapfrog = 1;
      t.sum_metro = std::isfinite(delta) ? std::min(1.0, std::exp(delta)) : 0.0;
      t.divergent = !(delta > -kDivergenceThreshold);  // NaN counts as divergent
      return t;
    }

    TreeStats inner = build_tree(depth - 1, edge, dir, eps, joint0);
    if (inner.divergent || inner.turning) return inner;

    TreeStats outer = build_tree(depth - 1, edge, dir, eps, joint0);

    TreeStats merged;
    merged.near_theta = std::move(inner.near_theta);
    merged.near_r = std::move(inner.near_r);
    merged.n_leapfrog = inner.n_leapfrog + outer.n_leapfrog;
    merged.sum_metro = inner.sum_metro + outer.sum_metro;
    merged.divergent = outer.divergent;
    merged.turning = outer.turning;
    merged.log_sum_w = log_add_exp(inner.log_sum_w, outer.log_sum_w);
    if (merged.divergent || merged.turning) return merged;

    // Unbiased multinomial choice between the halves.
    const double p_outer = std::exp(outer.log_sum_w - merged.log_sum_w);
    merged.proposal =
        rng_.uniform() < p_outer ? std::move(outer.proposal) : std::move(inner.proposal);

    // U-turn test across the merged subtree; in the backward direction the
    // trajectory's time order is reversed.
    merged.turning =
        dir > 0 ? is_turning(merged.near_theta, merged.near_r, edge.theta, edge.r)
                : is_turning(edge.theta, edge.r, merged.near_theta, merged.near_r);
    return merged;
  }

  Transition transition(Phase& z, double eps) {
    const Eigen::Index dim = z.theta.size();
    z.r = rng_.normal_vector(dim);
    const double joint0 = z.joint();

    Phase forward = z;   // outermost point in +1 direction
    Phase backward = z;  // outermost point in -1 direction
    Eigen::VectorXd proposal = z.theta;
    double log_sum_w = 0.0;  // weight of the initial point
    double sum_metro = 0.0;
    long n_leapfrog = 0;
    Transition result;

    for (int depth = 0; depth < cfg_.max_tree_depth; ++depth) {
      const int dir = rng_.uniform() < 0.5 ? -1 : 1;
      Phase& edge = dir > 0 ? forward : backward;
      TreeStats subtree = build_tree(depth, edge, dir, eps, joint0);
      sum_metro += subtree.sum_metro;
      n_leapfrog += subtree.n_leapfrog;
      result.depth = depth + 1;
      if (subtree.divergent) {
        result.divergent = true;
        break;
      }
      if (subtree.turning) break;

      // Biased progressive sampling: favor the new subtree.
      if (subtree.log_sum_w > log_sum_w ||
          rng_.uniform() < std::exp(subtree.log_sum_w - log_sum_w)) {
        proposal = subtree.proposal;
      }
      log_sum_w = log_add_exp(log_sum_w, subtree.log_sum_w);

      if (is_turning(backward, forward)) break;
    }

    z.theta = proposal;
    z.logp = eval(z.theta, z.grad);
    result.accept_stat = n_leapfrog > 0 ? sum_metro / static_cast<double>(n_leapfrog) : 0.0;
    return result;
  }

  static double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  }

  const LogDensityTarget& target_;
  const NutsConfig& cfg_;
  RngStream rng_;
};

}  // namespace

PosteriorDraws nuts_sample(const LogDensityTarget& target, const NutsConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  struct ChainResult {
    Eigen::MatrixXd draws;
    double step = 0.0, mean_accept = 0.0;
    long divergences = 0, max_depth = 0;
  };

  auto run_chain = [&](int chain) {
    ChainResult r;
    NutsChain runner(target, config, chain);
    r.draws = runner.run(r.step, r.divergences, r.mean_accept, r.max_depth);
    return r;
  };

  std::vector<ChainResult> results(config.chains);
  if (config.chains == 1) {
    results[0] = run_chain(0);
  } else {
    std::vector<std::future<ChainResult>> futures;
    futures.reserve(config.chains);
    for (int c = 0; c < config.chains; ++c)
      futures.push_back(std::async(std::launch::async, run_chain, c));
    for (int c = 0; c < config.chains; ++c) results[c] = futures[c].get();
  }

  PosteriorDraws out;
  out.source = PosteriorDraws::Source::Hmc;
  out.chains = config.chains;
  out.samples_per_chain = config.samples;
  out.draws.resize(static_cast<Eigen::Index>(config.chains) * config.samples, target.dim());
  long total_div = 0, max_depth = 0;
  double accept = 0.0, step_sum = 0.0;
  for (int c = 0; c < config.chains; ++c) {
    out.draws.middleRows(static_cast<Eigen::Index>(c) * config.samples, config.samples) =
        results[c].draws;
    total_div += results[c].divergences;
    max_depth = std::max(max_depth, results[c].max_depth);
    accept += results[c].mean_accept;
    step_sum += results[c].step;
    out.diagnostics["step_size_chain" + std::to_string(c)] = results[c].step;
  }
  out.diagnostics["divergences"] = static_cast<double>(total_div);
  out.diagnostics["mean_accept"] = accept / config.chains;
  out.diagnostics["step_size"] = step_sum / config.chains;
  out.diagnostics["max_depth_hit"] = static_cast<double>(max_depth);
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  out.validate();
  return out;
}

PosteriorDraws nuts_sample(const NetworkConfig& config, const Dataset& data,
                           const NutsConfig& nuts_config) {
  const BnnPosterior target(config, data);
  return nuts_sample(target, nuts_config);
}

}  // namespace bnn::hmc
