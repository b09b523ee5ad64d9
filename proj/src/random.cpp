#include "prefsamp/random.hpp"

#include <cmath>
#include <numbers>

#include "prefsamp/errors.hpp"

namespace prefsamp {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  const std::uint64_t a = splitmix64(s);
  std::uint64_t t = stream ^ 0xD1B54A32D192ED03ULL;
  const std::uint64_t b = splitmix64(t);
  std::uint64_t u = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(u);
}

// Standard normal restricted to [a, b] with 0 <= a < b.
double right_region(Rng& rng, double a, double b) {
  const double root = std::sqrt(a * a + 4.0);
  const double rate = 0.5 * (a + root);
  const double uniform_cutoff = a + (2.0 / (a + root)) * std::exp(0.25 * (a * a - a * root) + 0.5);
  if (b <= uniform_cutoff) {
    const double width = b - a;
    for (;;) {
      const double x = a + width * rng.uniform();
      if (rng.uniform() <= std::exp(0.5 * (a * a - x * x))) return x;
    }
  }
  for (;;) {
    const double x = a + rng.exponential(rate);
    if (x > b) continue;
    const double d = x - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return x;
  }
}

double standard_truncated(Rng& rng, double a, double b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a == -inf && b == inf) return rng.normal();
  if (a >= 0.0) return right_region(rng, a, b);
  if (b <= 0.0) return -right_region(rng, -b, -a);
  // a < 0 < b
  if (b - a < std::sqrt(2.0 * std::numbers::pi)) {
    const double width = b - a;
    for (;;) {
      const double x = a + width * rng.uniform();
      if (rng.uniform() <= std::exp(-0.5 * x * x)) return x;
    }
  }
  for (;;) {
    const double x = rng.normal();
    if (x >= a && x <= b) return x;
  }
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma: shape and rate must be positive");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(engine_);
}

double truncated_normal(Rng& rng, double mean, double sd, double lower, double upper) {
  if (!(sd > 0.0) || !std::isfinite(mean)) throw DomainError("truncated_normal: invalid mean or sd");
  if (!(lower < upper)) throw DomainError("truncated_normal: empty interval");
  return mean + sd * standard_truncated(rng, (lower - mean) / sd, (upper - mean) / sd);
}

Eigen::VectorXd normal_from_precision(Rng& rng, const Eigen::MatrixXd& precision,
                                      const Eigen::VectorXd& linear) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw DomainError("posterior precision is not positive definite");
  Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd z(linear.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + llt.matrixU().solve(z);
}

Eigen::MatrixXd inverse_wishart(Rng& rng, const Eigen::MatrixXd& scale, double df) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p) throw ShapeError("inverse_wishart: scale must be square");
  if (!(df > static_cast<double>(p) - 1.0)) throw DomainError("inverse_wishart: df must exceed p - 1");
  Eigen::LLT<Eigen::MatrixXd> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success) throw DomainError("inverse_wishart: scale is not SPD");

  // Bartlett decomposition of W ~ Wishart(scale^{-1}, df); the result is W^{-1}.
  const Eigen::MatrixXd scale_inv = scale_llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(scale_inv).matrixL();
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    bartlett(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (df - static_cast<double>(i)), 1.0));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  const Eigen::MatrixXd factor = chol * bartlett;
  const Eigen::MatrixXd factor_inv =
      factor.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd sigma = factor_inv.transpose() * factor_inv;
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace prefsamp
