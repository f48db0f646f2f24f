#include "bnn/combine.hpp"

#include <cmath>

#include "bnn/errors.hpp"
#include "bnn/stats.hpp"

namespace bnn::combine {

void WeightVector::validate(double tol) const {
  if (w.size() < 1) throw DimensionError("weight vector is empty");
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w[i] >= 0.0)) throw NumericError("weights must be nonnegative", i);
  if (std::abs(w.sum() - 1.0) > tol)
    throw NumericError("weights must sum to 1");
}

void CandidateSet::validate() const {
  if (members.empty()) throw DimensionError("candidate set is empty");
  const auto& first = members.front();
  for (const auto& m : members) {
    m.pred.validate();
    m.loglik.validate();
    if (m.loglik.n_points() != first.loglik.n_points())
      throw DimensionError("candidates disagree on training size N");
    if (m.pred.n_points() != first.pred.n_points())
      throw DimensionError("candidates disagree on prediction grid size");
    if (m.pred.x_new.size() > 0 && first.pred.x_new.size() > 0 &&
        (m.pred.x_new.rows() != first.pred.x_new.rows() ||
         !m.pred.x_new.isApprox(first.pred.x_new)))
      throw DimensionError("candidates disagree on prediction inputs");
    if (m.source != first.source)
      throw ConfigError(
          "HMC and VI candidates cannot be combined: their log predictive "
          "densities are on different scales");
  }
}

WeightVector ensemble_weights(int k) {
  if (k < 1) throw ConfigError("ensemble needs K >= 1 members");
  WeightVector out;
  out.w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  return out;
}

WeightVector pseudo_bma_weights(const std::vector<assess::ElpdResult>& elpds) {
  const int k = static_cast<int>(elpds.size());
  if (k < 1) throw ConfigError("pseudo-BMA needs K >= 1 models");
  const Eigen::Index n = elpds.front().pointwise.size();
  Eigen::VectorXd reg(k);
  for (int i = 0; i < k; ++i) {
    const auto& e = elpds[i];
    if (e.pointwise.size() != n)
      throw DimensionError("pseudo-BMA models disagree on N");
    const double center = e.total / static_cast<double>(n);
    const double ss = (e.pointwise.array() - center).square().sum();
    reg[i] = e.total - 0.5 * std::sqrt(ss);
  }
  const double lse = stats::log_sum_exp(reg);
  WeightVector out;
  out.w = (reg.array() - lse).exp();
  out.w /= out.w.sum();
  return out;
}

double stacking_objective(const Eigen::MatrixXd& p, const Eigen::VectorXd& w) {
  const Eigen::Index n = p.rows();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += std::log(p.row(i).dot(w));
  return acc / static_cast<double>(n);
}

WeightVector stacking_weights(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  const Eigen::Index k = p.cols();
  if (n < 1 || k < 1) throw DimensionError("stacking needs a nonempty density matrix");
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!(p.data()[i] > 0.0) || !std::isfinite(p.data()[i]))
      throw NumericError("stacking densities must be positive and finite", i);

  if (k == 1) {
    WeightVector out;
    out.w = Eigen::VectorXd::Ones(1);
    return out;
  }

  // Softmax parameterization, symmetric start (uniform weights).
  Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
  auto weights_of = [&](const Eigen::VectorXd& logits) {
    Eigen::VectorXd w = (logits.array() - stats::log_sum_exp(logits)).exp();
    w /= w.sum();
    return w;
  };

  Eigen::VectorXd w = weights_of(z);
  double objective = stacking_objective(p, w);
  std::vector<double> history{objective};

  constexpr int kMaxIters = 50000;
  constexpr double kTol = 1e-10;
  constexpr int kPatience = 50;
  double step = 1.0;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    // d objective / d w_k = (1/N) sum_n p_nk / (p_n . w); chain through softmax.
    Eigen::VectorXd g_w = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = p.row(i).dot(w);
      g_w += p.row(i).transpose() / denom;
    }
    g_w /= static_cast<double>(n);
    const double pivot = w.dot(g_w);
    const Eigen::VectorXd g_z = (w.array() * (g_w.array() - pivot)).matrix();

    // Backtracking line search on the concave objective.
    double trial_obj = objective;
    Eigen::VectorXd trial_z, trial_w;
    step = std::min(step * 2.0, 1e3);
    bool improved = false;
    while (step > 1e-16) {
      trial_z = z + step * g_z;
      trial_w = weights_of(trial_z);
      trial_obj = stacking_objective(p, trial_w);
      if (trial_obj > objective) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (improved) {
      z = trial_z;
      w = trial_w;
      objective = trial_obj;
    }
    history.push_back(objective);
    if (static_cast<int>(history.size()) > kPatience &&
        objective - history[history.size() - 1 - kPatience] < kTol)
      break;
  }

  WeightVector out;
  out.w = w;
  out.validate(1e-9);
  out.w /= out.w.sum();
  return out;
}

PredictiveSamples combine_predictive(const CandidateSet& set, const WeightVector& wv,
                                     Eigen::Index n_out, RngStream& rng) {
  set.validate();
  wv.validate();
  if (wv.size() != set.k())
    throw DimensionError("weight vector length does not match candidate count");
  if (n_out < 1) throw ConfigError("number of output draws must be >= 1");

  const Eigen::Index cols = set.members.front().pred.n_points();
  PredictiveSamples out;
  out.x_new = set.members.front().pred.x_new;
  out.mu_samples.resize(n_out, cols);
  out.y_samples.resize(n_out, cols);

  // Cumulative weights for the categorical draw.
  Eigen::VectorXd cum(wv.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < wv.size(); ++i) {
    acc += wv.w[i];
    cum[i] = acc;
  }
  cum[wv.size() - 1] = 1.0;

  for (Eigen::Index s = 0; s < n_out; ++s) {
    const double u = rng.uniform();
    Eigen::Index member = 0;
    while (member + 1 < wv.size() && u > cum[member]) ++member;
    const auto& pred = set.members[static_cast<std::size_t>(member)].pred;
    const Eigen::Index row = static_cast<Eigen::Index>(rng.uniform_index(
        static_cast<std::uint64_t>(pred.n_draws())));
    out.mu_samples.row(s) = pred.mu_samples.row(row);
    out.y_samples.row(s) = pred.y_samples.row(row);
  }
  return out;
}

std::pair<double, double> mixture_moments(const Eigen::VectorXd& means,
                                          const Eigen::VectorXd& vars,
                                          const WeightVector& wv) {
  wv.validate();
  if (means.size() != wv.size() || vars.size() != wv.size())
    throw DimensionError("mixture moment inputs disagree on K");
  const double mu = wv.w.dot(means);
  const double second = wv.w.dot((vars.array() + means.array().square()).matrix());
  return {mu, second - mu * mu};
}

}  // namespace bnn::combine
