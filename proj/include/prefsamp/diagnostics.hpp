#pragma once

#include <string>
#include <vector>

namespace prefsamp {

struct ParameterDiagnostic {
  std::string name;
  double ess = 0.0;
  double rhat = 0.0;
};

/// Split-R-hat: every chain is cut in half (the middle draw of odd-length
/// chains is dropped) and the classic potential scale reduction is computed
/// over the 2m half-chains. Chains are truncated to the shortest length.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Multi-chain effective sample size using Geyer's initial monotone sequence
/// on the combined autocorrelation estimate.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

}  // namespace prefsamp
