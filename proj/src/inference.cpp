#include "prefsamp/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "prefsamp/errors.hpp"
#include "prefsamp/math.hpp"

namespace prefsamp {

std::string to_string(ModelVariant variant) {
  return variant == ModelVariant::preferential ? "preferential" : "non_preferential";
}

ModelVariant parse_variant(const std::string& text) {
  if (text == "pref" || text == "preferential") return ModelVariant::preferential;
  if (text == "nonpref" || text == "non_preferential" || text == "non-preferential")
    return ModelVariant::non_preferential;
  throw ConfigError("unknown model variant '" + text + "' (expected pref or nonpref)");
}

void McmcConfig::validate() const {
  if (n_iterations < 1) throw ConfigError("mcmc: n_iterations must be positive");
  if (burn_in < 0 || burn_in >= n_iterations) throw ConfigError("mcmc: burn_in must lie in [0, n_iterations)");
  if (thin < 1) throw ConfigError("mcmc: thin must be >= 1");
  if (!(proposal_sd_loglambda > 0.0) || !(proposal_sd_lambda_tilde > 0.0))
    throw ConfigError("mcmc: proposal sds must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
    throw ConfigError("mcmc: target acceptance must lie in (0, 1)");
  if (n_chains < 1) throw ConfigError("mcmc: n_chains must be >= 1");
  if (loglambda_stride < 1) throw ConfigError("mcmc: loglambda_stride must be >= 1");
}

std::vector<std::string> parameter_names(ModelVariant variant, Index n_species, Index n_covariates) {
  std::vector<std::string> names;
  for (Index j = 0; j < n_species; ++j) names.push_back("alpha_" + std::to_string(j + 1));
  for (Index j = 0; j < n_species; ++j)
    for (Index l = 0; l < n_covariates; ++l)
      names.push_back("beta_" + std::to_string(j + 1) + "_" + std::to_string(l + 1));
  names.emplace_back("sigma2");
  if (variant == ModelVariant::preferential) {
    names.emplace_back("theta0");
    names.emplace_back("theta1");
    names.emplace_back("lambda_tilde");
  }
  return names;
}

std::vector<double> flatten_parameters(const ModelParams& params, ModelVariant variant) {
  std::vector<double> out;
  for (Index j = 0; j < params.n_species(); ++j) out.push_back(params.alpha(j));
  for (Index j = 0; j < params.beta.rows(); ++j)
    for (Index l = 0; l < params.beta.cols(); ++l) out.push_back(params.beta(j, l));
  out.push_back(params.sigma2);
  if (variant == ModelVariant::preferential) {
    out.push_back(params.theta(0));
    out.push_back(params.theta(1));
    out.push_back(params.lambda_tilde);
  }
  return out;
}

namespace {

Eigen::VectorXd totals(const LatentState& state) { return state.log_lambda.array().exp().colwise().sum().transpose(); }

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw DomainError("matrix is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

void require_z(const ModelParams& params, Index n_days) {
  if (params.z.size() != n_days) throw ShapeError("augmentation variables z must have one entry per day");
}

}  // namespace

Eigen::VectorXd update_z(const LatentState& state, const ModelParams& params, const ObservationSet& obs, Rng& rng) {
  const Index N = state.n_days();
  if (obs.n_days() != N) throw ShapeError("update_z: observation indicators and state disagree on N");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd total = totals(state);
  Eigen::VectorXd z(N);
  for (Index i = 0; i < N; ++i) {
    const double mean = params.theta(0) + (total(i) >= params.lambda_tilde ? params.theta(1) : 0.0);
    z(i) = obs.tau[i] ? truncated_normal(rng, mean, 1.0, 0.0, inf) : truncated_normal(rng, mean, 1.0, -inf, 0.0);
  }
  return z;
}

Eigen::Vector2d update_theta(const Eigen::VectorXd& z, const LatentState& state, const ModelParams& params,
                             const Hyperpriors& hyper, Rng& rng) {
  const Index N = state.n_days();
  if (z.size() != N) throw ShapeError("update_theta: z length");
  const Eigen::VectorXd total = totals(state);
  // D'D and D'z for the design columns (1, indicator).
  double n_on = 0.0;
  double z_sum = 0.0;
  double z_on = 0.0;
  for (Index i = 0; i < N; ++i) {
    z_sum += z(i);
    if (total(i) >= params.lambda_tilde) {
      n_on += 1.0;
      z_on += z(i);
    }
  }
  Eigen::Matrix2d dtd;
  dtd << static_cast<double>(N), n_on, n_on, n_on;
  const Eigen::Matrix2d prior_precision = hyper.Sigma_theta.inverse();
  const Eigen::MatrixXd precision = prior_precision + dtd;
  const Eigen::VectorXd linear = prior_precision * hyper.mu_theta + Eigen::Vector2d(z_sum, z_on);
  return normal_from_precision(rng, precision, linear);
}

Eigen::MatrixXd update_beta(const LatentState& state, const ModelParams& params, const CovariateSeries& covariates,
                            const Hyperpriors& /*hyper*/, Rng& rng) {
  const Index J = state.n_species();
  const Index N = state.n_days();
  const Index p = covariates.n_covariates();
  if (covariates.n_days() != N) throw ShapeError("update_beta: covariates and state disagree on N");
  const Eigen::MatrixXd prior_precision = spd_inverse(params.sigma_beta);
  const Eigen::VectorXd prior_linear = prior_precision * params.mu_beta;
  const auto& X = covariates.values;
  Eigen::MatrixXd beta(J, p);
  for (Index j = 0; j < J; ++j) {
    const double a = params.alpha(j);
    Eigen::MatrixXd vtv = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd vtd = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd v(p);
    for (Index i = 1; i < N; ++i) {
      v = X.row(i).transpose() - a * X.row(i - 1).transpose();
      const double d = state.log_lambda(j, i) - a * state.log_lambda(j, i - 1);
      vtv.selfadjointView<Eigen::Lower>().rankUpdate(v);
      vtd += d * v;
    }
    vtv = vtv.selfadjointView<Eigen::Lower>();
    const Eigen::MatrixXd precision = prior_precision + vtv / params.sigma2;
    const Eigen::VectorXd linear = prior_linear + vtd / params.sigma2;
    beta.row(j) = normal_from_precision(rng, precision, linear).transpose();
  }
  return beta;
}

Eigen::VectorXd update_alpha(const LatentState& state, const ModelParams& params, const CovariateSeries& covariates,
                             const Hyperpriors& hyper, Rng& rng, bool truncate) {
  const Index J = state.n_species();
  const Index N = state.n_days();
  const Eigen::MatrixXd T = trend(params.beta, covariates);
  Eigen::VectorXd alpha(J);
  for (Index j = 0; j < J; ++j) {
    double sxx = 0.0;
    double sxy = 0.0;
    double prev = state.log_lambda(j, 0) - T(j, 0);
    for (Index i = 1; i < N; ++i) {
      const double cur = state.log_lambda(j, i) - T(j, i);
      sxx += prev * prev;
      sxy += prev * cur;
      prev = cur;
    }
    const double precision = 1.0 / hyper.sigma2_alpha + sxx / params.sigma2;
    const double mean = (hyper.mu_alpha(j) / hyper.sigma2_alpha + sxy / params.sigma2) / precision;
    const double sd = 1.0 / std::sqrt(precision);
    alpha(j) = truncate ? truncated_normal(rng, mean, sd, -1.0, 1.0) : rng.normal(mean, sd);
    // The closed interval endpoints have probability zero but can appear after rounding.
    if (truncate && std::abs(alpha(j)) >= 1.0) alpha(j) = std::copysign(std::nextafter(1.0, 0.0), alpha(j));
  }
  return alpha;
}

double update_sigma2(const LatentState& state, const ModelParams& params, const CovariateSeries& covariates,
                     const Hyperpriors& hyper, Rng& rng) {
  const Index J = state.n_species();
  const Index N = state.n_days();
  const Eigen::MatrixXd T = trend(params.beta, covariates);
  double ss = 0.0;
  for (Index j = 0; j < J; ++j) {
    double prev = state.log_lambda(j, 0) - T(j, 0);
    for (Index i = 1; i < N; ++i) {
      const double cur = state.log_lambda(j, i) - T(j, i);
      const double e = cur - params.alpha(j) * prev;
      ss += e * e;
      prev = cur;
    }
  }
  const double shape = hyper.q + 0.5 * static_cast<double>(J * (N - 1));
  const double rate = hyper.r + 0.5 * ss;
  return 1.0 / rng.gamma(shape, rate);
}

BetaHyperDraw update_beta_hyper(const ModelParams& params, const Hyperpriors& hyper, Rng& rng) {
  const Index J = params.beta.rows();
  const Index p = params.beta.cols();
  if (J < 1) throw ShapeError("update_beta_hyper: at least one species is required");
  BetaHyperDraw out;
  const Eigen::MatrixXd sigma_inv = spd_inverse(params.sigma_beta);
  const Eigen::MatrixXd sigma0_inv = spd_inverse(hyper.Sigma0);
  const Eigen::VectorXd beta_sum = params.beta.colwise().sum().transpose();
  const Eigen::MatrixXd precision = sigma0_inv + static_cast<double>(J) * sigma_inv;
  const Eigen::VectorXd linear = sigma0_inv * hyper.mu0 + sigma_inv * beta_sum;
  out.mu_beta = normal_from_precision(rng, precision, linear);

  Eigen::MatrixXd scale = hyper.Psi;
  for (Index j = 0; j < J; ++j) {
    const Eigen::VectorXd d = params.beta.row(j).transpose() - out.mu_beta;
    scale += d * d.transpose();
  }
  (void)p;
  out.sigma_beta = inverse_wishart(rng, scale, hyper.nu + static_cast<double>(J));
  return out;
}

MetropolisStep update_lambda_tilde(const LatentState& state, const ModelParams& params, const Hyperpriors& hyper,
                                   double proposal_sd, Rng& rng) {
  const Index N = state.n_days();
  require_z(params, N);
  const double current = params.lambda_tilde;
  const double proposed = current * std::exp(proposal_sd * rng.normal());
  const Eigen::VectorXd total = totals(state);
  const double t0 = params.theta(0);
  const double t1 = params.theta(1);

  double delta = 0.0;
  for (Index i = 0; i < N; ++i) {
    const bool on_now = total(i) >= current;
    const bool on_new = total(i) >= proposed;
    if (on_now == on_new) continue;
    const double r_now = params.z(i) - t0 - (on_now ? t1 : 0.0);
    const double r_new = params.z(i) - t0 - (on_new ? t1 : 0.0);
    delta -= 0.5 * (r_new * r_new - r_now * r_now);
  }
  // Gamma prior plus the log-normal proposal Jacobian.
  delta += hyper.alpha_lambda * (std::log(proposed) - std::log(current)) - hyper.beta_lambda * (proposed - current);

  const double accept_prob = std::isfinite(delta) ? std::min(1.0, std::exp(delta)) : 0.0;
  const bool accepted = std::isfinite(delta) && (delta >= 0.0 || std::log(rng.uniform()) < delta);
  return {accepted ? proposed : current, accepted, accept_prob};
}

Index update_loglambda(LatentState& state, const ModelParams& params, const ObservationSet& obs,
                       const CovariateSeries& covariates, const Hyperpriors& hyper, ModelVariant variant,
                       Eigen::MatrixXd& log_proposal_sd, Rng& rng, double adapt_gain, double target_acceptance) {
  const Index J = state.n_species();
  const Index N = state.n_days();
  if (obs.n_days() != N || covariates.n_days() != N) throw ShapeError("update_loglambda: N mismatch");
  if (log_proposal_sd.rows() != J || log_proposal_sd.cols() != N) throw ShapeError("update_loglambda: proposal sd shape");
  const bool preferential = variant == ModelVariant::preferential;
  if (preferential) require_z(params, N);

  const Eigen::MatrixXd T = trend(params.beta, covariates);
  const std::vector<Index> column = obs.column_of_day();
  const double half_prec = 0.5 / params.sigma2;
  const double half_prec1 = 0.5 / hyper.sigma2_1;
  const double t0 = params.theta(0);
  const double t1 = params.theta(1);
  auto& L = state.log_lambda;

  Index accepted = 0;
  for (Index i = 0; i < N; ++i) {
    const Index k = column[i];
    double total = preferential ? L.col(i).array().exp().sum() : 0.0;
    for (Index j = 0; j < J; ++j) {
      const double cur = L(j, i);
      const double prop = cur + std::exp(log_proposal_sd(j, i)) * rng.normal();
      const double a = params.alpha(j);
      const double anom_cur = cur - T(j, i);
      const double anom_prop = prop - T(j, i);

      double delta = 0.0;
      if (i == 0) {
        const double dc = cur - hyper.mu1(j);
        const double dp = prop - hyper.mu1(j);
        delta -= (dp * dp - dc * dc) * half_prec1;
      } else {
        const double pred = a * (L(j, i - 1) - T(j, i - 1));
        const double dc = anom_cur - pred;
        const double dp = anom_prop - pred;
        delta -= (dp * dp - dc * dc) * half_prec;
      }
      if (i + 1 < N) {
        const double next = L(j, i + 1) - T(j, i + 1);
        const double dc = next - a * anom_cur;
        const double dp = next - a * anom_prop;
        delta -= (dp * dp - dc * dc) * half_prec;
      }

      double e_cur = 0.0;
      double e_prop = 0.0;
      bool have_exp = false;
      if (k >= 0) {
        e_cur = std::exp(cur);
        e_prop = std::exp(prop);
        have_exp = true;
        const double y = static_cast<double>(obs.counts(j, k));
        delta += y * (prop - cur) - obs.effort(k) * (e_prop - e_cur);
      }
      double total_prop = total;
      if (preferential) {
        if (!have_exp) {
          e_cur = std::exp(cur);
          e_prop = std::exp(prop);
        }
        total_prop = total - e_cur + e_prop;
        const bool on_cur = total >= params.lambda_tilde;
        const bool on_prop = total_prop >= params.lambda_tilde;
        if (on_cur != on_prop) {
          const double r_cur = params.z(i) - t0 - (on_cur ? t1 : 0.0);
          const double r_prop = params.z(i) - t0 - (on_prop ? t1 : 0.0);
          delta -= 0.5 * (r_prop * r_prop - r_cur * r_cur);
        }
      }

      const bool finite = std::isfinite(delta) && std::isfinite(prop);
      const bool accept = finite && (delta >= 0.0 || std::log(rng.uniform()) < delta);
      if (accept) {
        L(j, i) = prop;
        total = total_prop;
        ++accepted;
      }
      if (adapt_gain > 0.0) {
        const double prob = finite ? std::min(1.0, std::exp(delta)) : 0.0;
        log_proposal_sd(j, i) += adapt_gain * (prob - target_acceptance);
      }
    }
  }
  return accepted;
}

double loglambda_log_target(const LatentState& state, const ModelParams& params, const ObservationSet& obs,
                            const CovariateSeries& covariates, const Hyperpriors& hyper, ModelVariant variant) {
  double total = process_logdensity(state, params, covariates, hyper);
  for (Index k = 0; k < obs.n_observed(); ++k) {
    const Index i = obs.observed_days[k];
    total += observation_logdensity(obs.counts.col(k), state.log_lambda.col(i).array().exp().matrix(), obs.effort(k));
  }
  if (variant == ModelVariant::preferential) {
    require_z(params, state.n_days());
    for (Index i = 0; i < state.n_days(); ++i) {
      const double m = params.theta(0) + (state.total_abundance(i) >= params.lambda_tilde ? params.theta(1) : 0.0);
      total += normal_logpdf(params.z(i), m, 1.0);
    }
  }
  return total;
}

Hyperpriors default_hyperpriors(const ObservationSet& obs, const CovariateSeries& covariates) {
  double max_count = 0.0;
  if (obs.counts.size() > 0) max_count = static_cast<double>(obs.counts.maxCoeff());
  return Hyperpriors::defaults(obs.n_species(), covariates.n_covariates(), max_count);
}

namespace {

// Least-squares rows of B for log lambda ~ x, with a small ridge so short or
// collinear stretches stay solvable.
Eigen::MatrixXd least_squares_beta(const Eigen::MatrixXd& log_lambda, const Eigen::MatrixXd& X,
                                   const std::vector<Index>& days) {
  const Index J = log_lambda.rows();
  const Index p = X.cols();
  Eigen::MatrixXd xtx = 1e-6 * Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd xty = Eigen::MatrixXd::Zero(p, J);
  for (Index i : days) {
    xtx += X.row(i).transpose() * X.row(i);
    xty += X.row(i).transpose() * log_lambda.col(i).transpose();
  }
  return xtx.ldlt().solve(xty).transpose();
}

}  // namespace

ChainState initial_state(const ObservationSet& obs, const CovariateSeries& covariates, const McmcConfig& config) {
  const Index J = obs.n_species();
  const Index N = covariates.n_days();
  const Index p = covariates.n_covariates();
  const Index n = obs.n_observed();
  if (obs.n_days() != N) throw ShapeError("initial_state: observations and covariates disagree on N");
  if (J < 1) throw ShapeError("initial_state: at least one species is required");
  const auto& X = covariates.values;

  ChainState cs;
  auto& L = cs.state.log_lambda;
  L = Eigen::MatrixXd::Zero(J, N);
  for (Index k = 0; k < n; ++k)
    for (Index j = 0; j < J; ++j)
      L(j, obs.observed_days[k]) = std::log((static_cast<double>(obs.counts(j, k)) + 0.5) / obs.effort(k));

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(J, p);
  if (n > 0) {
    beta = least_squares_beta(L, X, obs.observed_days);
    const Eigen::MatrixXd T = beta * X.transpose();
    const Index first = obs.observed_days.front();
    const Index last = obs.observed_days.back();
    for (Index i = 0; i < first; ++i) L.col(i) = T.col(i);
    for (Index i = last + 1; i < N; ++i) L.col(i) = T.col(i);
    for (Index k = 0; k + 1 < n; ++k) {
      const Index a = obs.observed_days[k];
      const Index b = obs.observed_days[k + 1];
      for (Index i = a + 1; i < b; ++i) {
        const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
        L.col(i) = (1.0 - w) * L.col(a) + w * L.col(b);
      }
    }
    std::vector<Index> all(N);
    for (Index i = 0; i < N; ++i) all[i] = i;
    beta = least_squares_beta(L, X, all);
  }

  auto& P = cs.params;
  P.alpha = Eigen::VectorXd::Constant(J, 0.5);
  P.beta = beta;
  P.sigma2 = 0.1;
  const double frac = std::clamp(static_cast<double>(n) / static_cast<double>(N), 0.5 / static_cast<double>(N),
                                 1.0 - 0.5 / static_cast<double>(N));
  P.theta = Eigen::Vector2d(normal_quantile(frac), 0.0);
  std::vector<double> positive_totals;
  for (Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(obs.counts.col(k).sum()) / obs.effort(k);
    if (t > 0.0) positive_totals.push_back(t);
  }
  P.lambda_tilde = positive_totals.empty() ? 1.0 : quantile(positive_totals, 0.5);
  P.mu_beta = beta.colwise().mean().transpose();
  P.sigma_beta = Eigen::MatrixXd::Identity(p, p);
  if (config.variant == ModelVariant::preferential) {
    P.z.resize(N);
    for (Index i = 0; i < N; ++i) P.z(i) = obs.tau[i] ? 1.0 : -1.0;
  }
  return cs;
}

namespace {

void check_finite(bool ok, Index iteration, const char* block) {
  if (!ok) throw NumericalError(iteration, block);
}

}  // namespace

PosteriorDraws run_chain(const ObservationSet& data, const CovariateSeries& covariates, const Hyperpriors& hyper,
                         const McmcConfig& config, Index chain) {
  config.validate();
  data.validate();
  covariates.validate();
  if (data.n_days() != covariates.n_days())
    throw ShapeError("run_chain: observation indicators and covariates cover different day ranges");
  const Index J = data.n_species();
  const Index N = covariates.n_days();
  hyper.validate(J, covariates.n_covariates());

  const bool preferential = config.variant == ModelVariant::preferential;
  Rng rng(config.seed, streams::kChainBase + static_cast<std::uint64_t>(chain));
  ChainState cs = initial_state(data, covariates, config);
  auto& state = cs.state;
  auto& params = cs.params;

  Eigen::MatrixXd log_sd = Eigen::MatrixXd::Constant(J, N, std::log(config.proposal_sd_loglambda));
  double log_sd_tilde = std::log(config.proposal_sd_lambda_tilde);

  PosteriorDraws draws;
  draws.variant = config.variant;
  draws.chain = chain;
  draws.abundance_mean = Eigen::MatrixXd::Zero(J, N);
  draws.params_draws.reserve(static_cast<std::size_t>(config.n_stored()));

  double ll_accepted = 0.0;
  double tilde_accepted = 0.0;
  Index post_sweeps = 0;

  for (Index it = 0; it < config.n_iterations; ++it) {
    const bool burning = it < config.burn_in;
    const double gain = (config.adapt && burning) ? 1.0 / std::pow(static_cast<double>(it) + 1.0, 0.6) : 0.0;

    if (preferential) {
      params.z = update_z(state, params, data, rng);
      check_finite(params.z.allFinite(), it + 1, "z");
      params.theta = update_theta(params.z, state, params, hyper, rng);
      check_finite(params.theta.allFinite(), it + 1, "theta");
      const MetropolisStep step = update_lambda_tilde(state, params, hyper, std::exp(log_sd_tilde), rng);
      params.lambda_tilde = step.value;
      check_finite(std::isfinite(params.lambda_tilde) && params.lambda_tilde > 0.0, it + 1, "lambda_tilde");
      if (gain > 0.0) log_sd_tilde += gain * (step.acceptance_probability - config.target_acceptance);
      if (!burning) tilde_accepted += step.accepted ? 1.0 : 0.0;
    }

    const Index acc = update_loglambda(state, params, data, covariates, hyper, config.variant, log_sd, rng, gain,
                                       config.target_acceptance);
    check_finite(state.log_lambda.allFinite(), it + 1, "loglambda");
    if (!burning) ll_accepted += static_cast<double>(acc);

    params.alpha = update_alpha(state, params, covariates, hyper, rng, config.truncate_alpha);
    check_finite(params.alpha.allFinite(), it + 1, "alpha");
    params.beta = update_beta(state, params, covariates, hyper, rng);
    check_finite(params.beta.allFinite(), it + 1, "beta");
    const BetaHyperDraw bh = update_beta_hyper(params, hyper, rng);
    params.mu_beta = bh.mu_beta;
    check_finite(params.mu_beta.allFinite(), it + 1, "mu_beta");
    params.sigma_beta = bh.sigma_beta;
    check_finite(params.sigma_beta.allFinite(), it + 1, "sigma_beta");
    params.sigma2 = update_sigma2(state, params, covariates, hyper, rng);
    check_finite(std::isfinite(params.sigma2) && params.sigma2 > 0.0, it + 1, "sigma2");

    if (burning) continue;
    ++post_sweeps;
    if ((it - config.burn_in + 1) % config.thin != 0) continue;

    ModelParams snapshot = params;
    if (!config.store_z) snapshot.z.resize(0);
    const Index stored = static_cast<Index>(draws.params_draws.size());
    draws.params_draws.push_back(std::move(snapshot));
    draws.iterations.push_back(it + 1);
    draws.abundance_mean += state.log_lambda.array().exp().matrix();
    if (stored % config.loglambda_stride == 0) {
      draws.loglambda_iterations.push_back(it + 1);
      draws.loglambda_draws.push_back(state);
    }
  }

  if (!draws.params_draws.empty()) draws.abundance_mean /= static_cast<double>(draws.params_draws.size());
  if (post_sweeps > 0) {
    draws.acceptance_rates["loglambda"] = ll_accepted / (static_cast<double>(post_sweeps) * static_cast<double>(J * N));
    if (preferential) draws.acceptance_rates["lambda_tilde"] = tilde_accepted / static_cast<double>(post_sweeps);
  }
  return draws;
}

std::vector<PosteriorDraws> run_chains(const ObservationSet& data, const CovariateSeries& covariates,
                                       const Hyperpriors& hyper, const McmcConfig& config) {
  config.validate();
  const auto n_chains = static_cast<std::size_t>(config.n_chains);
  std::vector<PosteriorDraws> chains(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < n_chains; c = next++) {
      try {
        chains[c] = run_chain(data, covariates, hyper, config, static_cast<Index>(c));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::size_t>(n_chains, std::thread::hardware_concurrency()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Diagnostics over the merged chains, in chain order.
  const Index J = data.n_species();
  const Index p = covariates.n_covariates();
  const auto names = parameter_names(config.variant, J, p);
  std::vector<ParameterDiagnostic> diagnostics;
  if (!chains.front().params_draws.empty()) {
    std::vector<std::vector<std::vector<double>>> series(names.size(),
                                                         std::vector<std::vector<double>>(n_chains));
    for (std::size_t c = 0; c < n_chains; ++c) {
      for (const auto& d : chains[c].params_draws) {
        const auto flat = flatten_parameters(d, config.variant);
        for (std::size_t q = 0; q < names.size(); ++q) series[q][c].push_back(flat[q]);
      }
    }
    for (std::size_t q = 0; q < names.size(); ++q)
      diagnostics.push_back({names[q], effective_sample_size(series[q]), split_rhat(series[q])});
  }
  for (auto& c : chains) c.diagnostics = diagnostics;
  return chains;
}

}  // namespace prefsamp
