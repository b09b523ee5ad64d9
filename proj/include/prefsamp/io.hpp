#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "prefsamp/covariates.hpp"
#include "prefsamp/inference.hpp"
#include "prefsamp/model_core.hpp"

namespace prefsamp {

// Environment input: day,tmean_c[,extra...] with an optional ISO `date` column.
RawEnvironmentSeries load_environment(const std::filesystem::path& path);
std::string environment_csv(const RawEnvironmentSeries& raw);

// Covariates: day,intercept,<name_1>,... with an optional trailing `date` column.
CovariateSeries load_covariates(const std::filesystem::path& path);
std::string covariates_csv(const CovariateSeries& covariates);

struct LoadedObservations {
  ObservationSet set;
  std::vector<std::string> species;  // labels in first-appearance order
};

/// Reads day,species,count[,effort][,trap_fraction,duration_days] and aligns
/// it with the study days of `covariates`. Effort defaults to 1; when trap
/// fraction and duration are both present effort is their product.
LoadedObservations load_observations(const std::filesystem::path& path, const CovariateSeries& covariates);
std::string observations_csv(const ObservationSet& obs, const CovariateSeries& covariates,
                             const std::vector<std::string>& species);

/// Removes observed days whose total count is zero and sets their tau to 0.
ObservationSet drop_zero_days(const ObservationSet& obs);

std::vector<std::string> default_species_labels(Index n_species);

// Simulation outputs.
std::string truth_csv(const LatentState& state, const CovariateSeries& covariates);
LatentState load_truth(const std::filesystem::path& path, const CovariateSeries& covariates);
std::string counts_full_csv(const CountMatrix& counts, const CovariateSeries& covariates);
std::string tau_csv(const ObservationSet& obs, const CovariateSeries& covariates);

// Chain outputs.
std::string draws_params_csv(const std::vector<PosteriorDraws>& chains, Index n_species, Index n_covariates);
std::string draws_loglambda_csv(const std::vector<PosteriorDraws>& chains, const CovariateSeries& covariates,
                                const std::vector<std::string>& species);
std::string acceptance_csv(const std::vector<PosteriorDraws>& chains);
std::string diagnostics_csv(const std::vector<ParameterDiagnostic>& diagnostics);

/// Draws read back from a fit directory. Only draws whose latent path was
/// stored carry one; `paths[d]` is empty otherwise.
struct LoadedDraws {
  ModelVariant variant = ModelVariant::preferential;
  std::vector<Index> chain;
  std::vector<Index> iteration;
  std::vector<ModelParams> params;
  std::vector<LatentState> paths;
  std::vector<bool> has_path;
};

LoadedDraws load_draws(const std::filesystem::path& dir, const CovariateSeries& covariates,
                       const std::vector<std::string>& species);

}  // namespace prefsamp
