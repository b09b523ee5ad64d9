#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prefsamp/model_core.hpp"

namespace prefsamp {

/// Daily environmental record. `columns` holds named raw covariates; a GDD
/// column is added by with_growing_degree_days().
struct RawEnvironmentSeries {
  std::vector<int> day_index;
  std::vector<std::string> dates;  // optional
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> columns;

  std::size_t n_days() const { return day_index.size(); }
  const std::vector<double>& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  void validate() const;
};

enum class KernelKind {
  backward_box,  // mean over the window days strictly before t
  identity,      // raw value passed through
};

struct KernelSpec {
  std::string column;
  int window_days = 1;
  KernelKind kind = KernelKind::backward_box;
};

struct ConvolvedColumn {
  std::vector<double> values;
  std::vector<bool> truncated;  // window shorter than requested (warm-up)
};

/// max(0, min(tmean, cutoff) - base).
double growing_degree_days(double tmean_c, double base_c = 10.0, double cutoff_c = 30.0);

/// Adds a "gdd" column computed from the "tmean_c" column.
RawEnvironmentSeries with_growing_degree_days(RawEnvironmentSeries raw, double base_c = 10.0,
                                              double cutoff_c = 30.0);

/// Backward box average: output(t) is the mean of raw(t - window) .. raw(t - 1).
/// Days with less history average what is available; day 0 returns raw(0).
/// Uses a running cumulative sum.
ConvolvedColumn convolve_backward_box(std::span<const double> raw, int window_days);

/// Assembles an intercept column (optional) plus one convolved column per spec.
CovariateSeries build_design(const RawEnvironmentSeries& raw, const std::vector<KernelSpec>& specs,
                             bool include_intercept = true);

/// Smooth seasonal daily mean temperature with AR(1) weather noise,
/// loosely shaped like a temperate deciduous forest (annual mean 8 C,
/// amplitude 13 C). Synthetic; used for self-contained runs.
RawEnvironmentSeries synthetic_temperature(int first_year, int n_years, std::uint64_t seed);

}  // namespace prefsamp
