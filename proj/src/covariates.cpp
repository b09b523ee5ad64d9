#include "prefsamp/covariates.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "prefsamp/errors.hpp"
#include "prefsamp/random.hpp"

namespace prefsamp {

const std::vector<double>& RawEnvironmentSeries::column(const std::string& name) const {
  for (std::size_t c = 0; c < column_names.size(); ++c)
    if (column_names[c] == name) return columns[c];
  throw ConfigError("environment series has no column '" + name + "'");
}

bool RawEnvironmentSeries::has_column(const std::string& name) const {
  for (const auto& c : column_names)
    if (c == name) return true;
  return false;
}

void RawEnvironmentSeries::validate() const {
  if (column_names.size() != columns.size()) throw ShapeError("environment: column names/columns mismatch");
  for (std::size_t i = 1; i < day_index.size(); ++i) {
    if (day_index[i] != day_index[i - 1] + 1)
      throw ValidationError("environment: day " + std::to_string(day_index[i]) +
                            " does not follow the previous day by one");
  }
  if (!dates.empty() && dates.size() != day_index.size()) throw ShapeError("environment: dates length mismatch");
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != day_index.size())
      throw ShapeError("environment: column '" + column_names[c] + "' has the wrong length");
    for (std::size_t i = 0; i < columns[c].size(); ++i)
      if (!std::isfinite(columns[c][i]))
        throw ValidationError("environment: non-finite value in column '" + column_names[c] + "' on day " +
                              std::to_string(day_index[i]));
  }
}

double growing_degree_days(double tmean_c, double base_c, double cutoff_c) {
  if (!(base_c < cutoff_c)) throw ConfigError("growing_degree_days: base must be below cutoff");
  return std::max(0.0, std::min(tmean_c, cutoff_c) - base_c);
}

RawEnvironmentSeries with_growing_degree_days(RawEnvironmentSeries raw, double base_c, double cutoff_c) {
  const auto& tmean = raw.column("tmean_c");
  std::vector<double> gdd(tmean.size());
  for (std::size_t i = 0; i < tmean.size(); ++i) gdd[i] = growing_degree_days(tmean[i], base_c, cutoff_c);
  raw.column_names.push_back("gdd");
  raw.columns.push_back(std::move(gdd));
  return raw;
}

ConvolvedColumn convolve_backward_box(std::span<const double> raw, int window_days) {
  if (window_days < 1) throw ConfigError("convolve_backward_box: window must be >= 1 day");
  if (static_cast<std::size_t>(window_days) > raw.size())
    throw ConfigError("convolve_backward_box: window of " + std::to_string(window_days) +
                      " days is longer than the series");
  const std::size_t n = raw.size();
  const auto w = static_cast<std::size_t>(window_days);
  // cumulative[i] = raw[0] + ... + raw[i-1]
  std::vector<double> cumulative(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cumulative[i + 1] = cumulative[i] + raw[i];

  ConvolvedColumn out;
  out.values.resize(n);
  out.truncated.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t == 0) {
      out.values[0] = raw[0];
      out.truncated[0] = true;
      continue;
    }
    const std::size_t lo = t >= w ? t - w : 0;
    out.values[t] = (cumulative[t] - cumulative[lo]) / static_cast<double>(t - lo);
    out.truncated[t] = (t - lo) < w;
  }
  return out;
}

CovariateSeries build_design(const RawEnvironmentSeries& raw, const std::vector<KernelSpec>& specs,
                             bool include_intercept) {
  raw.validate();
  const auto n = static_cast<Index>(raw.n_days());
  const Index p = static_cast<Index>(specs.size()) + (include_intercept ? 1 : 0);
  if (p == 0) throw ConfigError("build_design: no columns requested");

  CovariateSeries cov;
  cov.values.resize(n, p);
  cov.day_index = raw.day_index;
  cov.dates = raw.dates;
  cov.warmup.assign(n, false);
  Index col = 0;
  if (include_intercept) {
    cov.values.col(col++).setOnes();
    cov.names.push_back("intercept");
  }
  for (const auto& spec : specs) {
    const auto& source = raw.column(spec.column);
    if (static_cast<Index>(source.size()) != n) throw ShapeError("build_design: column length mismatch");
    if (spec.kind == KernelKind::identity) {
      for (Index i = 0; i < n; ++i) cov.values(i, col) = source[i];
      cov.names.push_back(spec.column);
    } else {
      const auto conv = convolve_backward_box(source, spec.window_days);
      for (Index i = 0; i < n; ++i) {
        cov.values(i, col) = conv.values[i];
        if (conv.truncated[i]) cov.warmup[i] = true;
      }
      cov.names.push_back(spec.column + std::to_string(spec.window_days));
    }
    ++col;
  }
  return cov;
}

RawEnvironmentSeries synthetic_temperature(int first_year, int n_years, std::uint64_t seed) {
  using namespace std::chrono;
  if (n_years < 1) throw ConfigError("synthetic_temperature: n_years must be >= 1");
  const sys_days start{year{first_year} / January / 1};
  const sys_days stop{year{first_year + n_years} / January / 1};
  const auto n = static_cast<int>((stop - start).count());

  RawEnvironmentSeries raw;
  raw.column_names = {"tmean_c"};
  raw.columns.resize(1);
  Rng rng(seed, 0);
  constexpr double kPersistence = 0.7;
  constexpr double kWeatherSd = 3.0;
  const double innovation_sd = kWeatherSd * std::sqrt(1.0 - kPersistence * kPersistence);
  double weather = kWeatherSd * rng.normal();
  for (int i = 0; i < n; ++i) {
    const sys_days d = start + days{i};
    const year_month_day ymd{d};
    const sys_days jan1{ymd.year() / January / 1};
    const double doy = static_cast<double>((d - jan1).count()) + 1.0;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    if (i > 0) weather = kPersistence * weather + innovation_sd * rng.normal();
    const double seasonal = 8.0 + 13.0 * std::sin(2.0 * std::numbers::pi * (doy - 110.0) / 365.25);
    raw.day_index.push_back(i + 1);
    raw.dates.emplace_back(buf);
    raw.columns[0].push_back(std::round((seasonal + weather) * 100.0) / 100.0);
  }
  return raw;
}

}  // namespace prefsamp
