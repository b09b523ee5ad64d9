#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace prefsamp {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

/// Standard normal CDF through erfc, clamped to [1e-300, 1 - 1e-16] so that
/// log-probabilities stay finite deep in the tails.
inline double normal_cdf(double x) {
  constexpr double kLo = 1e-300;
  constexpr double kHi = 1.0 - 1e-16;
  const double p = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  if (p < kLo) return kLo;
  if (p > kHi) return kHi;
  return p;
}

/// Unclamped upper tail 1 - Phi(x); accurate for large positive x.
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_quantile(double p);

inline double normal_logpdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * d * d / variance;
}

inline double poisson_logpmf(long long y, double rate) {
  if (y == 0) return -rate;
  return static_cast<double>(y) * std::log(rate) - rate - std::lgamma(static_cast<double>(y) + 1.0);
}

inline double inverse_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Quantile with linear interpolation between order statistics
/// (h = (n - 1) p). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double prob);

/// Copies, sorts and evaluates quantile_sorted.
double quantile(std::span<const double> values, double prob);

double mean(std::span<const double> values);

}  // namespace prefsamp
