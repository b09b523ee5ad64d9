#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace prefsamp {

/// Stream identifiers. Each simulation operation and each MCMC chain draws
/// from its own stream so that changing one consumer never shifts another.
namespace streams {
inline constexpr std::uint64_t kProcess = 1;
inline constexpr std::uint64_t kCounts = 2;
inline constexpr std::uint64_t kSampling = 3;
inline constexpr std::uint64_t kChainBase = 1000;
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t& state);

/// 64-bit Mersenne Twister seeded from (seed, stream) through SplitMix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  using result_type = std::mt19937_64::result_type;
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  /// Gamma with shape/rate parameterisation.
  double gamma(double shape, double rate);
  double exponential(double rate) { return -std::log(uniform()) / rate; }
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Normal(mean, sd^2) restricted to [lower, upper]; either bound may be infinite.
/// Combines normal, uniform and exponential rejection depending on where the
/// interval sits, so deep tails cost O(1) expected draws.
double truncated_normal(Rng& rng, double mean, double sd, double lower,
                        double upper = std::numeric_limits<double>::infinity());

/// Draw from N(Q^{-1} b, Q^{-1}) given precision Q and linear term b.
Eigen::VectorXd normal_from_precision(Rng& rng, const Eigen::MatrixXd& precision,
                                      const Eigen::VectorXd& linear);

/// Inverse-Wishart IW(scale, df) with density proportional to
/// |S|^{-(df+p+1)/2} exp(-tr(scale S^{-1})/2); mean scale/(df-p-1).
Eigen::MatrixXd inverse_wishart(Rng& rng, const Eigen::MatrixXd& scale, double df);

}  // namespace prefsamp
