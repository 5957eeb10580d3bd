#pragma once

#include <cmath>
#include <span>

namespace dyncontrol {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// P(X > threshold) for X ~ N(mean, var); a point mass when var == 0.
inline double gaussian_exceedance(double mean, double var, double threshold) {
  if (var <= 0.0) return mean > threshold ? 1.0 : 0.0;
  return normal_sf((threshold - mean) / std::sqrt(var));
}

/// Mean and unbiased standard deviation in one pass (Welford).
struct SampleSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

inline SampleSummary summarize(std::span<const double> xs) {
  SampleSummary s;
  double m2 = 0.0;
  for (double x : xs) {
    ++s.n;
    const double d = x - s.mean;
    s.mean += d / static_cast<double>(s.n);
    m2 += d * (x - s.mean);
  }
  s.sd = s.n > 1 ? std::sqrt(m2 / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

}  // namespace dyncontrol
