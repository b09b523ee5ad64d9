#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "prefsamp/model_core.hpp"

namespace testutil {

using prefsamp::Index;

/// N x 2 design: intercept plus the given covariate values.
inline prefsamp::CovariateSeries design(const std::vector<double>& x) {
  prefsamp::CovariateSeries cov;
  cov.values.resize(static_cast<Index>(x.size()), 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov.values(static_cast<Index>(i), 0) = 1.0;
    cov.values(static_cast<Index>(i), 1) = x[i];
    cov.day_index.push_back(static_cast<int>(i + 1));
  }
  cov.names = {"intercept", "x"};
  cov.warmup.assign(x.size(), false);
  return cov;
}

inline prefsamp::ModelParams params(double alpha, double b0, double b1, double sigma2) {
  prefsamp::ModelParams p;
  p.alpha = Eigen::VectorXd::Constant(1, alpha);
  p.beta.resize(1, 2);
  p.beta << b0, b1;
  p.sigma2 = sigma2;
  p.mu_beta = Eigen::Vector2d(b0, b1);
  p.sigma_beta = Eigen::Matrix2d::Identity();
  return p;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("prefsamp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_var(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace testutil
