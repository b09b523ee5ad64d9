#include "prefsamp/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prefsamp/errors.hpp"
#include "prefsamp/math.hpp"

namespace prefsamp {

namespace {

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.isApprox(m.transpose(), 1e-10)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void CovariateSeries::validate() const {
  const Index n = n_days();
  if (n < 2) throw ValidationError("covariates: at least 2 days are required");
  if (n_covariates() < 1) throw ValidationError("covariates: no columns");
  if (static_cast<Index>(day_index.size()) != n)
    throw ValidationError("covariates: day_index length does not match the number of rows");
  if (!names.empty() && static_cast<Index>(names.size()) != n_covariates())
    throw ValidationError("covariates: names length does not match the number of columns");
  if (!dates.empty() && static_cast<Index>(dates.size()) != n)
    throw ValidationError("covariates: dates length does not match the number of rows");
  if (!all_finite(values)) throw ValidationError("covariates: non-finite value");
  for (Index i = 0; i < n; ++i) {
    if (values(i, 0) != 1.0) {
      std::ostringstream os;
      os << "covariates: intercept column is not 1.0 on day " << day_index[i];
      throw ValidationError(os.str());
    }
    if (i > 0 && day_index[i] <= day_index[i - 1]) {
      std::ostringstream os;
      os << "covariates: day " << day_index[i] << " is not strictly increasing";
      throw ValidationError(os.str());
    }
  }
}

std::optional<Index> CovariateSeries::position_of(int day) const {
  auto it = std::lower_bound(day_index.begin(), day_index.end(), day);
  if (it == day_index.end() || *it != day) return std::nullopt;
  return static_cast<Index>(it - day_index.begin());
}

void ModelParams::validate(bool require_stationary) const {
  const Index J = alpha.size();
  const Index p = beta.cols();
  if (beta.rows() != J) throw ShapeError("params: beta rows must equal length of alpha");
  if (mu_beta.size() != p) throw ShapeError("params: mu_beta length must equal number of covariates");
  if (sigma_beta.rows() != p || sigma_beta.cols() != p) throw ShapeError("params: sigma_beta must be p x p");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("params: sigma2 must be positive");
  if (!(lambda_tilde > 0.0) || !std::isfinite(lambda_tilde))
    throw DomainError("params: lambda_tilde must be positive");
  if (!alpha.allFinite() || !beta.allFinite() || !theta.allFinite() || !mu_beta.allFinite())
    throw DomainError("params: non-finite value");
  if (require_stationary && (alpha.array().abs() >= 1.0).any())
    throw DomainError("params: |alpha_j| must be < 1");
  if (!is_spd(sigma_beta)) throw DomainError("params: sigma_beta must be symmetric positive definite");
}

Hyperpriors Hyperpriors::defaults(Index n_species, Index n_covariates, double max_count) {
  Hyperpriors h;
  const Index J = n_species;
  const Index p = n_covariates;
  h.mu1 = Eigen::VectorXd::Zero(J);
  h.sigma2_1 = 100.0;
  h.mu0 = Eigen::VectorXd::Zero(p);
  h.Sigma0 = 100.0 * Eigen::MatrixXd::Identity(p, p);
  h.Psi = Eigen::MatrixXd::Identity(p, p);
  h.nu = static_cast<double>(p) + 2.0;
  h.mu_alpha = Eigen::VectorXd::Zero(J);
  h.sigma2_alpha = 1.0;
  h.mu_theta = Eigen::Vector2d::Zero();
  h.Sigma_theta = 4.0 * Eigen::Matrix2d::Identity();
  h.q = 2.0;
  h.r = 0.1;
  h.alpha_lambda = 2.0;
  const double prior_mean = max_count > 0.0 ? 0.1 * max_count : 1.0;
  h.beta_lambda = h.alpha_lambda / prior_mean;
  return h;
}

void Hyperpriors::validate(Index n_species, Index n_covariates) const {
  const Index J = n_species;
  const Index p = n_covariates;
  if (mu1.size() != J || mu_alpha.size() != J) throw ShapeError("hyperpriors: mu1/mu_alpha must have length J");
  if (mu0.size() != p) throw ShapeError("hyperpriors: mu0 must have length p");
  if (Sigma0.rows() != p || Sigma0.cols() != p || Psi.rows() != p || Psi.cols() != p)
    throw ShapeError("hyperpriors: Sigma0 and Psi must be p x p");
  if (!(sigma2_1 > 0.0) || !(sigma2_alpha > 0.0) || !(q > 0.0) || !(r > 0.0) || !(alpha_lambda > 0.0) ||
      !(beta_lambda > 0.0))
    throw DomainError("hyperpriors: scale parameters must be positive");
  if (!(nu > static_cast<double>(p) - 1.0)) throw DomainError("hyperpriors: nu must exceed p - 1");
  if (!is_spd(Sigma0) || !is_spd(Psi) || !is_spd(Eigen::MatrixXd(Sigma_theta)))
    throw DomainError("hyperpriors: covariance matrices must be SPD");
}

void ObservationSet::validate() const {
  const Index n = n_observed();
  if (counts.cols() != n) throw ValidationError("observations: counts columns must equal number of observed days");
  if (effort.size() != n) throw ValidationError("observations: effort length must equal number of observed days");
  Index tau_sum = 0;
  for (auto t : tau) {
    if (t > 1) throw ValidationError("observations: tau must be binary");
    tau_sum += t;
  }
  if (tau_sum != n) throw ValidationError("observations: sum(tau) does not equal the number of observed days");
  for (Index k = 0; k < n; ++k) {
    const Index d = observed_days[k];
    if (d < 0 || d >= n_days()) throw ValidationError("observations: observed day outside the study");
    if (k > 0 && d <= observed_days[k - 1]) throw ValidationError("observations: observed days must increase");
    if (tau[d] != 1) throw ValidationError("observations: tau is 0 on an observed day");
    if (!(effort(k) > 0.0) || !std::isfinite(effort(k)))
      throw ValidationError("observations: effort must be positive");
  }
  if ((counts.array() < 0).any()) throw ValidationError("observations: negative count");
  if (trap_fraction && duration_days) {
    if (trap_fraction->size() != n || duration_days->size() != n)
      throw ValidationError("observations: trap_fraction/duration_days length mismatch");
    for (Index k = 0; k < n; ++k) {
      if (std::abs((*trap_fraction)(k) * (*duration_days)(k) - effort(k)) > 1e-12)
        throw ValidationError("observations: effort differs from trap_fraction * duration_days");
    }
  }
}

std::vector<Index> ObservationSet::column_of_day() const {
  std::vector<Index> out(tau.size(), -1);
  for (Index k = 0; k < n_observed(); ++k) out[observed_days[k]] = k;
  return out;
}

ObservationSet ObservationSet::fully_observed(const CountMatrix& full_counts) {
  ObservationSet obs;
  const Index N = full_counts.cols();
  obs.tau.assign(N, 1);
  obs.observed_days.resize(N);
  for (Index i = 0; i < N; ++i) obs.observed_days[i] = i;
  obs.counts = full_counts;
  obs.effort = Eigen::VectorXd::Ones(N);
  return obs;
}

Eigen::VectorXd process_mean(const ModelParams& params, const CovariateSeries& covariates,
                             const Eigen::VectorXd& prev_log_lambda, Index day) {
  if (day < 1 || day >= covariates.n_days()) throw IndexError("process_mean: day out of range");
  if (prev_log_lambda.size() != params.n_species()) throw ShapeError("process_mean: prev_log_lambda length");
  if (params.beta.cols() != covariates.n_covariates()) throw ShapeError("process_mean: beta/covariate mismatch");
  if (!prev_log_lambda.allFinite()) throw DomainError("process_mean: non-finite previous state");
  const Eigen::VectorXd now = params.beta * covariates.values.row(day).transpose();
  const Eigen::VectorXd before = params.beta * covariates.values.row(day - 1).transpose();
  Eigen::VectorXd out = now.array() - params.alpha.array() * before.array() + params.alpha.array() * prev_log_lambda.array();
  if (!out.allFinite()) throw DomainError("process_mean: non-finite result");
  return out;
}

Eigen::MatrixXd trend(const Eigen::MatrixXd& beta, const CovariateSeries& covariates) {
  if (beta.cols() != covariates.n_covariates()) throw ShapeError("trend: beta/covariate mismatch");
  return beta * covariates.values.transpose();
}

double process_logdensity(const LatentState& state, const ModelParams& params,
                          const CovariateSeries& covariates, const Hyperpriors& hyper) {
  const Index J = state.n_species();
  const Index N = state.n_days();
  if (params.n_species() != J || hyper.mu1.size() != J) throw ShapeError("process_logdensity: species mismatch");
  if (covariates.n_days() < N) throw ShapeError("process_logdensity: covariates shorter than state");
  if (params.beta.cols() != covariates.n_covariates()) throw ShapeError("process_logdensity: beta/covariate mismatch");

  double total = 0.0;
  for (Index j = 0; j < J; ++j) total += normal_logpdf(state.log_lambda(j, 0), hyper.mu1(j), hyper.sigma2_1);
  for (Index i = 1; i < N; ++i) {
    const Eigen::VectorXd m = process_mean(params, covariates, state.log_lambda.col(i - 1), i);
    for (Index j = 0; j < J; ++j) total += normal_logpdf(state.log_lambda(j, i), m(j), params.sigma2);
  }
  return total;
}

double observation_logdensity(const CountVector& counts, const Eigen::VectorXd& lambda, double effort) {
  if (counts.size() != lambda.size()) throw ShapeError("observation_logdensity: counts/lambda length mismatch");
  if (!(effort > 0.0) || !std::isfinite(effort)) throw DomainError("observation_logdensity: effort must be positive");
  double total = 0.0;
  for (Index j = 0; j < counts.size(); ++j) {
    const double rate = lambda(j) * effort;
    if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("observation_logdensity: rate must be positive");
    if (counts(j) < 0) throw DomainError("observation_logdensity: negative count");
    total += poisson_logpmf(counts(j), rate);
  }
  return total;
}

double inclusion_probability(const Eigen::Vector2d& theta, double total_abundance, double lambda_tilde) {
  if (!theta.allFinite() || !std::isfinite(total_abundance) || !std::isfinite(lambda_tilde))
    throw DomainError("inclusion_probability: non-finite input");
  const double indicator = total_abundance >= lambda_tilde ? 1.0 : 0.0;
  return normal_cdf(theta(0) + theta(1) * indicator);
}

}  // namespace prefsamp
