#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "prefsamp/model_core.hpp"

namespace prefsamp {

/// How days of the fully observed count series are retained.
struct SamplingMechanism {
  enum class Kind { random, preferential_switch, logistic };

  Kind kind = Kind::random;
  double prob = 1.0;       // random, preferential_switch
  double threshold = 0.0;  // preferential_switch
  double intercept = 0.0;  // logistic
  double slope = 0.0;      // logistic

  static SamplingMechanism random(double prob);
  static SamplingMechanism preferential_switch(double threshold, double prob);
  static SamplingMechanism logistic(double intercept, double slope);

  /// Probability that a day with the given total abundance is kept.
  double keep_probability(double total_abundance) const;
  void validate() const;
  /// "random", "preferential_switch" or "logistic".
  std::string name() const;
  static Kind parse_kind(const std::string& name);
};

/// Distribution of log lambda(t_1) used by the forward simulator.
struct ProcessInit {
  Eigen::VectorXd mean;      // J
  Eigen::VectorXd variance;  // J
};

/// mean = B x(t_1), variance_j = sigma2 / (1 - alpha_j^2).
ProcessInit trend_anchored_init(const ModelParams& params, const CovariateSeries& covariates);

/// Draws log lambda(t_1) from `init`, then iterates the trend-anchored
/// autoregression. With `allow_degenerate`, zero variances give the
/// deterministic path.
LatentState simulate_process(const ModelParams& params, const CovariateSeries& covariates,
                             const ProcessInit& init, std::uint64_t seed, bool allow_degenerate = false);

/// Independent Poisson(lambda_j(t_i) * effort_i) counts for every day.
CountMatrix simulate_counts(const LatentState& state, const Eigen::VectorXd& effort, std::uint64_t seed);

/// Retains days according to `mechanism`, thresholding on latent total abundance.
/// `effort` has one entry per study day.
ObservationSet apply_sampling(const CountMatrix& full_counts, const LatentState& state,
                              const SamplingMechanism& mechanism, std::uint64_t seed,
                              const Eigen::VectorXd& effort);

struct SimulationTruth {
  LatentState state;
  CountMatrix full_counts;
  ObservationSet observations;
  ModelParams params;
  SamplingMechanism mechanism;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// Runs the three simulation steps on independent streams of `seed`.
SimulationTruth simulate_dataset(const ModelParams& params, const CovariateSeries& covariates,
                                 const ProcessInit& init, const Eigen::VectorXd& effort,
                                 const SamplingMechanism& mechanism, std::uint64_t seed);

/// Single-species process parameters of the reference simulation study:
/// alpha = 0.98, beta = (0.1, 0.3) on (intercept, GDD), sigma2 = 0.03.
ModelParams reference_simulation_params();

/// Random(0.3), PreferentialSwitch(15, 0.3), Logistic(-10, 0.4).
std::array<SamplingMechanism, 3> reference_sampling_mechanisms();

}  // namespace prefsamp
