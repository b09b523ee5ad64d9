#pragma once

#include <optional>
#include <span>
#include <vector>

#include "prefsamp/inference.hpp"
#include "prefsamp/model_core.hpp"

namespace prefsamp {

/// Conditional median of the per-capita growth rate on `day` (>= 1):
/// exp(beta_j (x(t) - alpha_j x(t-1))) lambda_prev^(alpha_j - 1) - 1.
double growth_rate_median(double alpha_j, const Eigen::VectorXd& beta_j, const CovariateSeries& covariates,
                          double lambda_prev, Index day);

/// Same quantity with the previous abundance supplied on the log scale.
double growth_rate_median_log(double alpha_j, const Eigen::VectorXd& beta_j, const CovariateSeries& covariates,
                              double log_lambda_prev, Index day);

/// Contiguous range of study days [first, last] belonging to one calendar year.
struct YearWindow {
  int year = 0;
  Index first = 0;
  Index last = 0;
};

/// Calendar years from ISO dates when present, otherwise consecutive 365-day
/// blocks numbered 1, 2, ...
std::vector<YearWindow> year_windows(const CovariateSeries& covariates);

/// First study day t in [window_start, window_end] whose conditional median
/// growth rate is positive, using the draw's alpha_j, beta_j and log lambda_j(t-1).
/// Day 0 has no predecessor and is skipped.
std::optional<Index> phenometric_psi(const ModelParams& draw, const LatentState& path,
                                     const CovariateSeries& covariates, Index species, Index window_start,
                                     Index window_end);

/// Root-mean-squared difference.
double rmse_abundance(std::span<const double> estimate, std::span<const double> truth);

/// Pointwise summary of lambda = exp(log lambda) over draws (J x N matrices).
struct SeriesSummary {
  double level = 0.5;
  Eigen::MatrixXd median;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
};

/// Equal-tailed `level` band (0.5 gives the IQR) with linearly interpolated quantiles.
SeriesSummary summarize_series(const std::vector<LatentState>& draws, double level);

/// Per-day growth-rate summaries across draws; column 0 (no predecessor) is NaN.
struct GrowthSummary {
  Eigen::MatrixXd median;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd q25;
  Eigen::MatrixXd q75;
};

/// Draw-wise conditional-median growth rates. `params_draws[d]` pairs with `paths[d]`.
GrowthSummary summarize_growth(const std::vector<ModelParams>& params_draws, const std::vector<LatentState>& paths,
                               const CovariateSeries& covariates);

struct Theta1Test {
  double lower = 0.0;
  double upper = 0.0;
  double p_positive = 0.0;
};

/// 95% equal-tailed interval for theta1 and P(theta1 > 0 | data).
Theta1Test theta1_preferential_test(const PosteriorDraws& draws);
Theta1Test theta1_preferential_test(const std::vector<PosteriorDraws>& chains);

/// Summary-statistic baseline: first observed day in the window whose count
/// for `species` is strictly greater than the previous observed day's count.
std::optional<Index> baseline_psi(const ObservationSet& obs, Index species, Index window_start, Index window_end);

}  // namespace prefsamp
