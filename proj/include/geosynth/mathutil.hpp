#pragma once
// Special functions, distribution tails, and small sample summaries.

#include <cstddef>
#include <span>
#include <vector>

namespace geosynth {

// Regularized incomplete gamma P(a,x) (lower) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double inc_beta(double a, double b, double x);

double normal_cdf(double z);
double normal_quantile(double p);

// Student-t CDF and central quantile; df may be non-integer.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

// chi-square upper tail probability with k degrees of freedom
double chisq_sf(double x, double k);

// Poisson CDF P(Y <= y) at rate lambda (y < 0 gives 0).
double poisson_cdf(long y, double lambda);

double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);

// Empirical quantile with linear interpolation between order statistics
// (the convention used for all reported bands and risk summaries).
double quantile(std::vector<double> v, double p);

} // namespace geosynth
