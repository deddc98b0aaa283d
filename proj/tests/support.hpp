#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace testing {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double std_error() const { return std::sqrt(variance / static_cast<double>(n)); }
  std::size_t n = 0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = xs.size();
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(m.n - 1);
  return m;
}

// One-sample Kolmogorov-Smirnov statistic sqrt(n) * D_n.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return std::sqrt(n) * d;
}

// Asymptotic Kolmogorov critical value at significance 1e-3.
inline constexpr double kKsCritical1e3 = 1.9495;

inline double chi_square_critical(double dof, double significance) {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), significance));
}

}  // namespace testing
