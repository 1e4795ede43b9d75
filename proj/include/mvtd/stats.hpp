#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mvtd/errors.hpp"

namespace mvtd {

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

inline double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / (xs.size() - 1));
}

inline double standard_error(const std::vector<double>& xs) {
  return sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
}

// (1-delta) quantile via order statistics: the ceil(R(1-delta))-th smallest,
// clamped to [1, R]. delta = 1 gives the minimum.
inline double order_quantile(std::vector<double> xs, double delta) {
  const auto r = static_cast<long>(xs.size());
  long idx = static_cast<long>(std::ceil((1.0 - delta) * r));
  idx = std::max<long>(1, std::min(idx, r));
  std::nth_element(xs.begin(), xs.begin() + (idx - 1), xs.end());
  return xs[idx - 1];
}

// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x,
                       const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DimensionMismatch("slope fit needs matching arrays, >= 2 points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return ls_slope(lx, ly);
}

// One-sided sign test p-value: P(X >= successes) for X ~ Binomial(n, 1/2).
inline double sign_test_pvalue(int successes, int n) {
  double p = 0.0;
  for (int k = successes; k <= n; ++k) {
    double log_comb = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                      std::lgamma(n - k + 1.0);
    p += std::exp(log_comb - n * std::log(2.0));
  }
  return std::min(p, 1.0);
}

}  // namespace mvtd
