#include "prefsamp/derived.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "prefsamp/errors.hpp"
#include "prefsamp/math.hpp"

namespace prefsamp {

namespace {

double growth_log_ratio(double alpha_j, const Eigen::VectorXd& beta_j, const CovariateSeries& covariates,
                        double log_lambda_prev, Index day) {
  if (day < 1 || day >= covariates.n_days()) throw IndexError("growth rate: day must lie in [1, N)");
  if (beta_j.size() != covariates.n_covariates()) throw ShapeError("growth rate: beta_j length");
  const auto& X = covariates.values;
  const double drive = X.row(day).dot(beta_j) - alpha_j * X.row(day - 1).dot(beta_j);
  return drive + (alpha_j - 1.0) * log_lambda_prev;
}

}  // namespace

double growth_rate_median(double alpha_j, const Eigen::VectorXd& beta_j, const CovariateSeries& covariates,
                          double lambda_prev, Index day) {
  if (!(lambda_prev > 0.0) || !std::isfinite(lambda_prev))
    throw DomainError("growth_rate_median: previous abundance must be positive");
  return std::expm1(growth_log_ratio(alpha_j, beta_j, covariates, std::log(lambda_prev), day));
}

double growth_rate_median_log(double alpha_j, const Eigen::VectorXd& beta_j, const CovariateSeries& covariates,
                              double log_lambda_prev, Index day) {
  if (!std::isfinite(log_lambda_prev)) throw DomainError("growth_rate_median: non-finite previous abundance");
  return std::expm1(growth_log_ratio(alpha_j, beta_j, covariates, log_lambda_prev, day));
}

std::vector<YearWindow> year_windows(const CovariateSeries& covariates) {
  std::vector<YearWindow> out;
  const Index N = covariates.n_days();
  if (!covariates.dates.empty()) {
    for (Index i = 0; i < N; ++i) {
      const std::string& d = covariates.dates[static_cast<std::size_t>(i)];
      if (d.size() < 4) throw ValidationError("dates must be ISO formatted (YYYY-MM-DD)");
      const int year = std::stoi(d.substr(0, 4));
      if (out.empty() || out.back().year != year) {
        out.push_back({year, i, i});
      } else {
        out.back().last = i;
      }
    }
    return out;
  }
  int block = 1;
  for (Index start = 0; start < N; start += 365, ++block) out.push_back({block, start, std::min(N, start + 365) - 1});
  return out;
}

std::optional<Index> phenometric_psi(const ModelParams& draw, const LatentState& path,
                                     const CovariateSeries& covariates, Index species, Index window_start,
                                     Index window_end) {
  if (window_start < 0 || window_end >= path.n_days() || window_start > window_end)
    throw IndexError("phenometric_psi: window outside the study");
  if (species < 0 || species >= path.n_species()) throw IndexError("phenometric_psi: species out of range");
  const Eigen::VectorXd beta_j = draw.beta.row(species).transpose();
  for (Index t = std::max<Index>(window_start, 1); t <= window_end; ++t) {
    if (growth_log_ratio(draw.alpha(species), beta_j, covariates, path.log_lambda(species, t - 1), t) > 0.0) return t;
  }
  return std::nullopt;
}

double rmse_abundance(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) throw ShapeError("rmse_abundance: length mismatch");
  if (estimate.empty()) throw ShapeError("rmse_abundance: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate[i] - truth[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(estimate.size()));
}

SeriesSummary summarize_series(const std::vector<LatentState>& draws, double level) {
  if (draws.empty()) throw StateError("summarize_series: no draws");
  if (draws.size() < 2) throw StateError("summarize_series: at least 2 draws are required");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("summarize_series: level must lie in (0, 1)");
  const Index J = draws.front().n_species();
  const Index N = draws.front().n_days();
  SeriesSummary s;
  s.level = level;
  s.median.resize(J, N);
  s.mean.resize(J, N);
  s.lower.resize(J, N);
  s.upper.resize(J, N);
  const double tail = 0.5 * (1.0 - level);
  std::vector<double> values(draws.size());
  for (Index j = 0; j < J; ++j) {
    for (Index i = 0; i < N; ++i) {
      for (std::size_t d = 0; d < draws.size(); ++d) values[d] = std::exp(draws[d].log_lambda(j, i));
      s.mean(j, i) = mean(values);
      std::sort(values.begin(), values.end());
      s.median(j, i) = quantile_sorted(values, 0.5);
      s.lower(j, i) = quantile_sorted(values, tail);
      s.upper(j, i) = quantile_sorted(values, 1.0 - tail);
    }
  }
  return s;
}

GrowthSummary summarize_growth(const std::vector<ModelParams>& params_draws, const std::vector<LatentState>& paths,
                               const CovariateSeries& covariates) {
  if (params_draws.size() != paths.size()) throw ShapeError("summarize_growth: params/paths count mismatch");
  if (paths.empty()) throw StateError("summarize_growth: no draws");
  const Index J = paths.front().n_species();
  const Index N = paths.front().n_days();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  GrowthSummary g{Eigen::MatrixXd::Constant(J, N, nan), Eigen::MatrixXd::Constant(J, N, nan),
                  Eigen::MatrixXd::Constant(J, N, nan), Eigen::MatrixXd::Constant(J, N, nan)};
  std::vector<double> values(paths.size());
  for (Index j = 0; j < J; ++j) {
    for (Index t = 1; t < N; ++t) {
      for (std::size_t d = 0; d < paths.size(); ++d) {
        values[d] = growth_rate_median_log(params_draws[d].alpha(j), params_draws[d].beta.row(j).transpose(),
                                           covariates, paths[d].log_lambda(j, t - 1), t);
      }
      g.mean(j, t) = mean(values);
      std::sort(values.begin(), values.end());
      g.median(j, t) = quantile_sorted(values, 0.5);
      g.q25(j, t) = quantile_sorted(values, 0.25);
      g.q75(j, t) = quantile_sorted(values, 0.75);
    }
  }
  return g;
}

Theta1Test theta1_preferential_test(const std::vector<PosteriorDraws>& chains) {
  std::vector<double> theta1;
  for (const auto& c : chains) {
    if (c.variant != ModelVariant::preferential)
      throw StateError("theta1 test requires draws from the preferential model");
    for (const auto& d : c.params_draws) theta1.push_back(d.theta(1));
  }
  if (theta1.empty()) throw StateError("theta1 test: no draws");
  std::sort(theta1.begin(), theta1.end());
  Theta1Test t;
  t.lower = quantile_sorted(theta1, 0.025);
  t.upper = quantile_sorted(theta1, 0.975);
  const auto positive = std::count_if(theta1.begin(), theta1.end(), [](double v) { return v > 0.0; });
  t.p_positive = static_cast<double>(positive) / static_cast<double>(theta1.size());
  return t;
}

Theta1Test theta1_preferential_test(const PosteriorDraws& draws) {
  return theta1_preferential_test(std::vector<PosteriorDraws>{draws});
}

std::optional<Index> baseline_psi(const ObservationSet& obs, Index species, Index window_start, Index window_end) {
  if (species < 0 || species >= obs.n_species()) throw IndexError("baseline_psi: species out of range");
  std::optional<std::int64_t> previous;
  for (Index k = 0; k < obs.n_observed(); ++k) {
    const Index day = obs.observed_days[k];
    if (day < window_start) continue;
    if (day > window_end) break;
    const std::int64_t c = obs.counts(species, k);
    if (previous && c > *previous) return day;
    previous = c;
  }
  return std::nullopt;
}

}  // namespace prefsamp
