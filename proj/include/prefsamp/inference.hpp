#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prefsamp/diagnostics.hpp"
#include "prefsamp/model_core.hpp"
#include "prefsamp/random.hpp"

namespace prefsamp {

enum class ModelVariant { preferential, non_preferential };

std::string to_string(ModelVariant variant);
/// Accepts "pref"/"preferential" and "nonpref"/"non_preferential".
ModelVariant parse_variant(const std::string& text);

struct McmcConfig {
  Index n_iterations = 50000;
  Index burn_in = 20000;
  Index thin = 10;
  ModelVariant variant = ModelVariant::preferential;
  double proposal_sd_loglambda = 0.3;   // initial random-walk sd for every latent site
  double proposal_sd_lambda_tilde = 0.2;  // sd of the log-scale walk on the threshold
  bool adapt = true;                    // Robbins-Monro tuning during burn-in only
  double target_acceptance = 0.44;
  bool truncate_alpha = true;           // restrict alpha_j to (-1, 1)
  std::uint64_t seed = 1;
  Index n_chains = 1;
  Index loglambda_stride = 1;           // keep the latent path of every k-th stored draw
  bool store_z = false;                 // keep augmentation variables in stored draws

  void validate() const;
  Index n_stored() const { return (n_iterations - burn_in) / thin; }
};

/// Latent path plus parameters: the full Markov chain state.
struct ChainState {
  LatentState state;
  ModelParams params;
};

struct PosteriorDraws {
  ModelVariant variant = ModelVariant::preferential;
  Index chain = 0;
  std::vector<Index> iterations;  // 1-based sweep number of each stored draw
  std::vector<ModelParams> params_draws;
  std::vector<Index> loglambda_iterations;
  std::vector<LatentState> loglambda_draws;
  Eigen::MatrixXd abundance_mean;  // J x N posterior mean of lambda over all stored sweeps
  std::map<std::string, double> acceptance_rates;  // post burn-in, Metropolis blocks
  std::vector<ParameterDiagnostic> diagnostics;
};

/// Column names of the scalar summary of a draw, in CSV order.
std::vector<std::string> parameter_names(ModelVariant variant, Index n_species, Index n_covariates);
/// Values matching parameter_names().
std::vector<double> flatten_parameters(const ModelParams& params, ModelVariant variant);

// Full-conditional updates. Each draws one value from the conditional of its
// block given everything else.

/// z_i ~ N(theta0 + theta1 1{total_i >= lambda_tilde}, 1), truncated to (0, inf)
/// where tau_i = 1 and (-inf, 0] where tau_i = 0.
Eigen::VectorXd update_z(const LatentState& state, const ModelParams& params, const ObservationSet& obs,
                         Rng& rng);

/// Conjugate bivariate normal for the probit regression of z on (1, indicator).
Eigen::Vector2d update_theta(const Eigen::VectorXd& z, const LatentState& state, const ModelParams& params,
                             const Hyperpriors& hyper, Rng& rng);

/// Per-species conjugate normal for beta_j from the one-step transitions.
Eigen::MatrixXd update_beta(const LatentState& state, const ModelParams& params,
                            const CovariateSeries& covariates, const Hyperpriors& hyper, Rng& rng);

/// Per-species conjugate normal for alpha_j from the anomaly autoregression,
/// optionally truncated to (-1, 1).
Eigen::VectorXd update_alpha(const LatentState& state, const ModelParams& params,
                             const CovariateSeries& covariates, const Hyperpriors& hyper, Rng& rng,
                             bool truncate = true);

/// Inverse-gamma draw from the transition residuals (initial state excluded).
double update_sigma2(const LatentState& state, const ModelParams& params, const CovariateSeries& covariates,
                     const Hyperpriors& hyper, Rng& rng);

struct BetaHyperDraw {
  Eigen::VectorXd mu_beta;
  Eigen::MatrixXd sigma_beta;
};

/// mu_beta | Sigma_beta, B (normal), then Sigma_beta | mu_beta, B (inverse-Wishart).
BetaHyperDraw update_beta_hyper(const ModelParams& params, const Hyperpriors& hyper, Rng& rng);

struct MetropolisStep {
  double value;
  bool accepted;
  double acceptance_probability;
};

/// Log-normal random-walk Metropolis step on the threshold.
MetropolisStep update_lambda_tilde(const LatentState& state, const ModelParams& params, const Hyperpriors& hyper,
                                   double proposal_sd, Rng& rng);

/// One single-site random-walk Metropolis sweep over days then species.
/// `log_proposal_sd` (J x N) is adapted in place when `adapt_gain` > 0.
/// Returns the number of accepted moves.
Index update_loglambda(LatentState& state, const ModelParams& params, const ObservationSet& obs,
                       const CovariateSeries& covariates, const Hyperpriors& hyper, ModelVariant variant,
                       Eigen::MatrixXd& log_proposal_sd, Rng& rng, double adapt_gain = 0.0,
                       double target_acceptance = 0.44);

/// Log of the unnormalised full conditional of the latent path (process prior,
/// Poisson terms and, for the preferential variant, the z terms).
double loglambda_log_target(const LatentState& state, const ModelParams& params, const ObservationSet& obs,
                            const CovariateSeries& covariates, const Hyperpriors& hyper, ModelVariant variant);

/// Data-driven starting point.
ChainState initial_state(const ObservationSet& obs, const CovariateSeries& covariates, const McmcConfig& config);

/// Runs one chain. Throws NumericalError naming the block and iteration if
/// the state becomes non-finite.
PosteriorDraws run_chain(const ObservationSet& data, const CovariateSeries& covariates, const Hyperpriors& hyper,
                         const McmcConfig& config, Index chain = 0);

/// Runs config.n_chains chains on worker threads and attaches merged diagnostics
/// to every chain.
std::vector<PosteriorDraws> run_chains(const ObservationSet& data, const CovariateSeries& covariates,
                                       const Hyperpriors& hyper, const McmcConfig& config);

/// Hyperprior defaults for a dataset (threshold prior scaled by the largest count).
Hyperpriors default_hyperpriors(const ObservationSet& obs, const CovariateSeries& covariates);

}  // namespace prefsamp
