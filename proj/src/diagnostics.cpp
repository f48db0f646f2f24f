#include "bnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bnn/errors.hpp"
#include "bnn/stats.hpp"

namespace bnn::hmc {

namespace {

// Average ranks (ties averaged), then Blom normal scores.
Eigen::VectorXd rank_normalize(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  Eigen::VectorXd rank(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (Eigen::Index k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  Eigen::VectorXd z(n);
  const double denom = static_cast<double>(n) + 0.25;
  for (Eigen::Index k = 0; k < n; ++k)
    z[k] = stats::normal_quantile((rank[k] - 0.375) / denom);
  return z;
}

// Autocovariance about the chain mean, denominator n.
std::vector<double> autocovariance(const Eigen::VectorXd& x, Eigen::Index max_lag) {
  const Eigen::Index n = x.size();
  const double m = x.mean();
  Eigen::VectorXd c = x.array() - m;
  std::vector<double> acov(max_lag + 1, 0.0);
  for (Eigen::Index t = 0; t <= max_lag; ++t) {
    double s = 0.0;
    for (Eigen::Index k = 0; k + t < n; ++k) s += c[k] * c[k + t];
    acov[t] = s / static_cast<double>(n);
  }
  return acov;
}

}  // namespace

double ChainDiagnostics::min_ess() const {
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ess.size(); ++i)
    if (!degenerate[i]) m = std::min(m, ess[i]);
  return m;
}

double ChainDiagnostics::max_rhat() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < split_rhat.size(); ++i)
    if (!degenerate[i]) m = std::max(m, split_rhat[i]);
  return m;
}

ChainDiagnostics chain_diagnostics(const PosteriorDraws& draws) {
  draws.validate();
  const Eigen::Index spc =
      draws.samples_per_chain > 0 ? draws.samples_per_chain : draws.n_draws();
  const Eigen::Index half = spc / 2;
  if (half < 4)
    throw ConfigError("chain diagnostics need at least 8 draws per chain");
  const int n_split = 2 * draws.chains;
  const Eigen::Index n = half;  // length of each split chain
  const Eigen::Index total = static_cast<Eigen::Index>(n_split) * n;
  const Eigen::Index P = draws.n_params();

  ChainDiagnostics out;
  out.ess.resize(P);
  out.split_rhat.resize(P);
  out.degenerate.assign(P, false);

  for (Eigen::Index p = 0; p < P; ++p) {
    // Gather split chains, dropping the middle draw for odd lengths.
    Eigen::VectorXd pooled(total);
    Eigen::Index at = 0;
    for (int c = 0; c < draws.chains; ++c) {
      const Eigen::Index base = static_cast<Eigen::Index>(c) * spc;
      for (Eigen::Index k = 0; k < n; ++k) pooled[at++] = draws.draws(base + k, p);
      for (Eigen::Index k = 0; k < n; ++k)
        pooled[at++] = draws.draws(base + spc - n + k, p);
    }

    if (pooled.maxCoeff() == pooled.minCoeff()) {
      out.degenerate[p] = true;
      out.ess[p] = 0.0;
      out.split_rhat[p] = std::numeric_limits<double>::infinity();
      continue;
    }

    const Eigen::VectorXd z = rank_normalize(pooled);

    // Split-Rhat on the normalized scores.
    Eigen::VectorXd chain_means(n_split), chain_vars(n_split);
    for (int m = 0; m < n_split; ++m) {
      const Eigen::VectorXd seg = z.segment(static_cast<Eigen::Index>(m) * n, n);
      chain_means[m] = seg.mean();
      chain_vars[m] = (seg.array() - chain_means[m]).square().sum() / (n - 1);
    }
    const double w = chain_vars.mean();
    const double b_over_n = n_split > 1
                                ? (chain_means.array() - chain_means.mean()).square().sum() /
                                      (n_split - 1)
                                : 0.0;
    const double var_plus = (static_cast<double>(n - 1) / n) * w + b_over_n;
    out.split_rhat[p] = std::sqrt(var_plus / w);

    // Bulk ESS: Geyer initial monotone positive pair sums.
    const Eigen::Index max_lag = n - 4;
    std::vector<std::vector<double>> acov(n_split);
    for (int m = 0; m < n_split; ++m)
      acov[m] = autocovariance(z.segment(static_cast<Eigen::Index>(m) * n, n), max_lag);

    auto rho = [&](Eigen::Index t) {
      double mean_acov = 0.0;
      for (int m = 0; m < n_split; ++m) mean_acov += acov[m][t];
      mean_acov /= n_split;
      return 1.0 - (w - mean_acov) / var_plus;
    };

    std::vector<double> pair_sums;
    for (Eigen::Index t = 0; t + 1 <= max_lag; t += 2) {
      const double p0 = t == 0 ? 1.0 : rho(t);
      const double p1 = rho(t + 1);
      const double s = p0 + p1;
      if (s <= 0.0) break;
      pair_sums.push_back(s);
    }
    double tau = -1.0;
    double running_min = std::numeric_limits<double>::infinity();
    for (double s : pair_sums) {
      running_min = std::min(running_min, s);
      tau += 2.0 * running_min;
    }
    tau = std::max(tau, 1.0 / std::log10(static_cast<double>(total) + 10.0));
    out.ess[p] = static_cast<double>(total) / tau;
  }
  return out;
}

}  // namespace bnn::hmc
