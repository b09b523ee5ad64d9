#include "prefsamp/simulator.hpp"

#include <cmath>

#include "prefsamp/errors.hpp"
#include "prefsamp/math.hpp"
#include "prefsamp/random.hpp"

namespace prefsamp {

SamplingMechanism SamplingMechanism::random(double prob) {
  SamplingMechanism m;
  m.kind = Kind::random;
  m.prob = prob;
  m.validate();
  return m;
}

SamplingMechanism SamplingMechanism::preferential_switch(double threshold, double prob) {
  SamplingMechanism m;
  m.kind = Kind::preferential_switch;
  m.threshold = threshold;
  m.prob = prob;
  m.validate();
  return m;
}

SamplingMechanism SamplingMechanism::logistic(double intercept, double slope) {
  SamplingMechanism m;
  m.kind = Kind::logistic;
  m.intercept = intercept;
  m.slope = slope;
  m.validate();
  return m;
}

double SamplingMechanism::keep_probability(double total_abundance) const {
  switch (kind) {
    case Kind::random:
      return prob;
    case Kind::preferential_switch:
      return total_abundance >= threshold ? prob : 0.0;
    case Kind::logistic:
      return inverse_logit(intercept + slope * total_abundance);
  }
  return 0.0;
}

void SamplingMechanism::validate() const {
  if (kind != Kind::logistic && !(prob > 0.0 && prob <= 1.0))
    throw ConfigError("sampling: probability must lie in (0, 1]");
  if (kind == Kind::preferential_switch && !(threshold > 0.0))
    throw ConfigError("sampling: threshold must be positive");
  if (kind == Kind::logistic && (!std::isfinite(intercept) || !std::isfinite(slope)))
    throw ConfigError("sampling: logistic coefficients must be finite");
}

std::string SamplingMechanism::name() const {
  switch (kind) {
    case Kind::random:
      return "random";
    case Kind::preferential_switch:
      return "preferential_switch";
    case Kind::logistic:
      return "logistic";
  }
  return "unknown";
}

SamplingMechanism::Kind SamplingMechanism::parse_kind(const std::string& name) {
  if (name == "random") return Kind::random;
  if (name == "preferential_switch" || name == "switch") return Kind::preferential_switch;
  if (name == "logistic") return Kind::logistic;
  throw ConfigError("unknown sampling mechanism '" + name + "'");
}

ProcessInit trend_anchored_init(const ModelParams& params, const CovariateSeries& covariates) {
  ProcessInit init;
  init.mean = params.beta * covariates.values.row(0).transpose();
  init.variance = params.sigma2 / (1.0 - params.alpha.array().square());
  return init;
}

LatentState simulate_process(const ModelParams& params, const CovariateSeries& covariates,
                             const ProcessInit& init, std::uint64_t seed, bool allow_degenerate) {
  const Index J = params.n_species();
  const Index N = covariates.n_days();
  if (params.beta.rows() != J || params.beta.cols() != covariates.n_covariates())
    throw ShapeError("simulate_process: beta shape does not match species/covariates");
  if (init.mean.size() != J || init.variance.size() != J) throw ShapeError("simulate_process: init shape");
  if ((params.alpha.array().abs() >= 1.0).any()) throw DomainError("simulate_process: |alpha_j| must be < 1");
  const bool zero_noise = params.sigma2 == 0.0;
  if (!(params.sigma2 > 0.0) && !(allow_degenerate && zero_noise))
    throw DomainError("simulate_process: sigma2 must be positive");
  if ((init.variance.array() < 0.0).any() || (!allow_degenerate && (init.variance.array() == 0.0).any()))
    throw DomainError("simulate_process: initial variance must be positive");

  Rng rng(seed, streams::kProcess);
  const Eigen::MatrixXd trend_values = trend(params.beta, covariates);
  const double sd = std::sqrt(params.sigma2);
  LatentState state;
  state.log_lambda.resize(J, N);
  for (Index j = 0; j < J; ++j) state.log_lambda(j, 0) = init.mean(j) + std::sqrt(init.variance(j)) * rng.normal();
  for (Index i = 1; i < N; ++i) {
    for (Index j = 0; j < J; ++j) {
      const double anomaly = state.log_lambda(j, i - 1) - trend_values(j, i - 1);
      state.log_lambda(j, i) = trend_values(j, i) + params.alpha(j) * anomaly + sd * rng.normal();
    }
  }
  if (!state.log_lambda.allFinite()) throw DomainError("simulate_process: non-finite path");
  return state;
}

CountMatrix simulate_counts(const LatentState& state, const Eigen::VectorXd& effort, std::uint64_t seed) {
  const Index J = state.n_species();
  const Index N = state.n_days();
  if (effort.size() != N) throw ShapeError("simulate_counts: effort must have one entry per day");
  if ((effort.array() <= 0.0).any()) throw DomainError("simulate_counts: effort must be positive");
  Rng rng(seed, streams::kCounts);
  CountMatrix counts(J, N);
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < J; ++j) {
      const double rate = std::exp(state.log_lambda(j, i)) * effort(i);
      counts(j, i) = rng.poisson(rate);
    }
  }
  return counts;
}

ObservationSet apply_sampling(const CountMatrix& full_counts, const LatentState& state,
                              const SamplingMechanism& mechanism, std::uint64_t seed,
                              const Eigen::VectorXd& effort) {
  mechanism.validate();
  const Index N = state.n_days();
  if (full_counts.cols() != N || full_counts.rows() != state.n_species())
    throw ShapeError("apply_sampling: counts/state shape mismatch");
  if (effort.size() != N) throw ShapeError("apply_sampling: effort must have one entry per day");

  Rng rng(seed, streams::kSampling);
  ObservationSet obs;
  obs.tau.assign(N, 0);
  for (Index i = 0; i < N; ++i) {
    // One uniform per day keeps the stream aligned regardless of the mechanism.
    const double u = rng.uniform();
    if (u < mechanism.keep_probability(state.total_abundance(i))) {
      obs.tau[i] = 1;
      obs.observed_days.push_back(i);
    }
  }
  const Index n = obs.n_observed();
  obs.counts.resize(state.n_species(), n);
  obs.effort.resize(n);
  for (Index k = 0; k < n; ++k) {
    obs.counts.col(k) = full_counts.col(obs.observed_days[k]);
    obs.effort(k) = effort(obs.observed_days[k]);
  }
  return obs;
}

SimulationTruth simulate_dataset(const ModelParams& params, const CovariateSeries& covariates,
                                 const ProcessInit& init, const Eigen::VectorXd& effort,
                                 const SamplingMechanism& mechanism, std::uint64_t seed) {
  SimulationTruth truth;
  truth.params = params;
  truth.mechanism = mechanism;
  truth.seed = seed;
  truth.state = simulate_process(params, covariates, init, seed);
  truth.full_counts = simulate_counts(truth.state, effort, seed);
  truth.observations = apply_sampling(truth.full_counts, truth.state, mechanism, seed, effort);
  truth.observations.validate();
  if (truth.observations.n_observed() == 0)
    truth.warnings.push_back("sampling mechanism retained no days (n = 0)");
  return truth;
}

ModelParams reference_simulation_params() {
  ModelParams p;
  p.alpha = Eigen::VectorXd::Constant(1, 0.98);
  p.beta.resize(1, 2);
  p.beta << 0.1, 0.3;
  p.sigma2 = 0.03;
  p.theta = Eigen::Vector2d::Zero();
  p.lambda_tilde = 15.0;
  p.mu_beta = p.beta.row(0).transpose();
  p.sigma_beta = Eigen::MatrixXd::Identity(2, 2);
  return p;
}

std::array<SamplingMechanism, 3> reference_sampling_mechanisms() {
  return {SamplingMechanism::random(0.3), SamplingMechanism::preferential_switch(15.0, 0.3),
          SamplingMechanism::logistic(-10.0, 0.4)};
}

}  // namespace prefsamp
