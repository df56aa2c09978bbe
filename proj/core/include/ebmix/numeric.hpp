#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ebmix {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// log(sum(exp(x))) without overflow; returns -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

double normal_log_pdf(double x, double mean, double variance);
double normal_pdf(double x);
double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate far into the right tail.
double normal_sf(double x);
double normal_log_sf(double x);
double normal_log_cdf(double x);
// log(Phi(hi) - Phi(lo)) for lo < hi, computed on the tail that avoids cancellation.
double normal_log_interval(double lo, double hi);

double log_choose(int n, int k);
double log_beta(double a, double b);

// Nodes and weights of an n-point Gauss-Legendre rule mapped onto [a, b].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule gauss_legendre(std::size_t n, double a, double b);

// Natural cubic spline through (x_i, y_i) with strictly increasing x.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

  double value(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;

 private:
  std::size_t segment(double t) const;

  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

double median(std::vector<double> values);
// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double p);

}  // namespace ebmix
