#include "bnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bnn/errors.hpp"

namespace bnn::stats {

double kahan_sum(const double* data, Eigen::Index n) {
  // Neumaier's variant: survives cancellation of a large running sum.
  double sum = 0.0, c = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = data[i];
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

double kahan_sum(const std::vector<double>& v) {
  return kahan_sum(v.data(), static_cast<Eigen::Index>(v.size()));
}

double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw Error("mean of empty vector");
  return kahan_sum(v) / static_cast<double>(v.size());
}

double variance(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n < 2) throw Error("variance needs at least 2 values");
  const double m = mean(v);
  Eigen::VectorXd sq = (v.array() - m).square();
  return kahan_sum(sq) / static_cast<double>(n - 1);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

double quantile_sorted(const std::vector<double>& x, double p) {
  if (x.empty()) throw Error("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw Error("quantile level outside [0, 1]");
  const std::size_t n = x.size();
  if (n == 1) return x[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, p);
}

double log_normal_pdf(double x, double mu, double variance) {
  const double r = x - mu;
  return -0.5 * (log_2pi + std::log(variance)) - r * r / (2.0 * variance);
}

double log_student_t_pdf(double x, double scale_sq, double nu) {
  const double s = std::sqrt(scale_sq);
  const double z = x / s;
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * M_PI) - std::log(s) -
         0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double log_half_normal_pdf(double x, double scale_sq) {
  // 2 * N(x | 0, scale_sq) on x >= 0.
  return std::log(2.0) - 0.5 * (log_2pi + std::log(scale_sq)) - x * x / (2.0 * scale_sq);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_quantile(double p) {
  // Wichura (1988), algorithm AS241, PPND16.
  if (p <= 0.0 || p >= 1.0) throw Error("normal_quantile needs p in (0, 1)");
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

KsTest ks_test(std::vector<double> sample, double (*cdf)(double)) {
  if (sample.empty()) throw Error("ks_test of empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  // Asymptotic Kolmogorov distribution tail.
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    p += sign * 2.0 * std::exp(-2.0 * k * k * t * t);
    sign = -sign;
  }
  p = std::clamp(p, 0.0, 1.0);
  return {d, p};
}

}  // namespace bnn::stats
