#ifndef BNN_STATS_HPP
#define BNN_STATS_HPP

#include <vector>

#include <Eigen/Core>

namespace bnn::stats {

inline constexpr double log_2pi = 1.8378770664093454835606594728112353;

// Kahan compensated summation.
double kahan_sum(const double* data, Eigen::Index n);
inline double kahan_sum(const Eigen::VectorXd& v) { return kahan_sum(v.data(), v.size()); }
double kahan_sum(const std::vector<double>& v);

double mean(const Eigen::VectorXd& v);
// Sample variance, n-1 denominator.
double variance(const Eigen::VectorXd& v);

// max(v) + log(sum(exp(v - max))); -inf on empty input.
double log_sum_exp(const Eigen::VectorXd& v);

// Type-7 quantile (linear interpolation of order statistics), p in [0, 1].
double quantile(std::vector<double> sorted_or_not, double p);
// Same, but on data already sorted ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

double log_normal_pdf(double x, double mean, double variance);
// Student-t with location 0, squared scale `scale_sq`, df `nu`.
double log_student_t_pdf(double x, double scale_sq, double nu);
// Half-normal on x >= 0 with squared scale `scale_sq` (the variance of the
// underlying zero-mean normal).
double log_half_normal_pdf(double x, double scale_sq);

double normal_cdf(double x);
// Inverse standard normal CDF (Wichura's AS241, double precision).
double normal_quantile(double p);

// Two-sided Kolmogorov-Smirnov statistic of `sample` against a continuous CDF
// evaluated by `cdf`, plus the asymptotic p-value.
struct KsTest {
  double statistic;
  double p_value;
};
KsTest ks_test(std::vector<double> sample, double (*cdf)(double));

}  // namespace bnn::stats

#endif  // BNN_STATS_HPP
