// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. `--only 3,4` runs a subset.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prefsamp/cli.hpp"
#include "prefsamp/covariates.hpp"
#include "prefsamp/csv.hpp"
#include "prefsamp/derived.hpp"
#include "prefsamp/inference.hpp"
#include "prefsamp/io.hpp"
#include "prefsamp/math.hpp"
#include "prefsamp/model_core.hpp"
#include "prefsamp/random.hpp"
#include "prefsamp/simulator.hpp"

using namespace prefsamp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// small helpers

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << "  command failed (" << code << "): " << err.str();
  return code;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("prefsamp_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Standard normal pdf and cdf written out here rather than taken from the library.
double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Moments of N(m, 1) truncated to (lo, hi).
std::pair<double, double> truncated_moments(double m, double lo, double hi) {
  const double a = lo - m, b = hi - m;
  const double pa = std::isfinite(a) ? phi(a) : 0.0, pb = std::isfinite(b) ? phi(b) : 0.0;
  const double Z = Phi(b) - Phi(a);
  const double ta = std::isfinite(a) ? a * pa : 0.0, tb = std::isfinite(b) ? b * pb : 0.0;
  const double mean = m + (pa - pb) / Z;
  const double var = 1.0 + (ta - tb) / Z - ((pa - pb) / Z) * ((pa - pb) / Z);
  return {mean, var};
}

// Checks a sample's mean and variance against exact values within `k` Monte
// Carlo standard errors. The variance SE uses the sample fourth central moment.
struct MomentCheck {
  std::string what;
  double z_mean = 0.0;
  double z_var = 0.0;
};

MomentCheck moment_check(const std::string& what, const std::vector<double>& x, double mean, double var) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  const double se_mean = std::sqrt(var / n);
  const double se_var = std::sqrt(std::max(m4 - m2 * m2, 1e-300) / n);
  return {what, (m - mean) / se_mean, (m2 - var) / se_var};
}

Outcome summarize_checks(const std::vector<MomentCheck>& checks, double k) {
  double worst = 0.0;
  std::string worst_name;
  bool ok = true;
  for (const auto& c : checks) {
    const double z = std::max(std::abs(c.z_mean), std::abs(c.z_var));
    if (z > worst) {
      worst = z;
      worst_name = c.what;
    }
    if (!(z < k)) {
      ok = false;
      std::cerr << fmt::format("  {}: mean z = {:.2f}, variance z = {:.2f}\n", c.what, c.z_mean, c.z_var);
    }
  }
  return {ok, fmt::format("{} moment checks, worst |z| = {:.2f} ({}), limit {}", checks.size(), worst, worst_name, k)};
}

// KS distance between a sample and a CDF tabulated on an increasing grid.
double ks_distance(std::vector<double> sample, const std::vector<double>& grid, const std::vector<double>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double x = sample[k];
    double F;
    if (x <= grid.front()) {
      F = 0.0;
    } else if (x >= grid.back()) {
      F = 1.0;
    } else {
      const auto it = std::upper_bound(grid.begin(), grid.end(), x);
      const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
      const double w = (x - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
      F = cdf[hi - 1] + w * (cdf[hi] - cdf[hi - 1]);
    }
    worst = std::max({worst, std::abs(F - static_cast<double>(k) / n), std::abs(F - static_cast<double>(k + 1) / n)});
  }
  return worst;
}

CovariateSeries simple_design(const std::vector<double>& x) {
  CovariateSeries cov;
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

// ---------------------------------------------------------------------------
// 1 and 2: simulation study at desk scale

struct StudyFit {
  double rmse_non = 0.0;
  double rmse_pref = 0.0;
  Theta1Test theta1;
};

struct StudyResults {
  // [mechanism][seed]
  std::vector<std::vector<StudyFit>> fits;
  std::vector<std::string> mechanisms;
  double max_fit_seconds = 0.0;
};

const StudyResults& simulation_study() {
  static StudyResults results;
  static bool done = false;
  if (done) return results;
  done = true;
  const int n_seeds = 10;
  const auto root = scratch("study");
  results.mechanisms = {"random", "preferential_switch", "logistic"};
  results.fits.assign(3, std::vector<StudyFit>(n_seeds));
  for (int s = 1; s <= n_seeds; ++s) {
    const fs::path data = root / ("seed" + std::to_string(s));
    if (cli({"simulate", "--preset", "paper-sim", "--seed", std::to_string(s), "--out", data.string()}) != 0)
      throw std::runtime_error("simulate failed");
    for (std::size_t m = 0; m < 3; ++m) {
      const fs::path dir = data / results.mechanisms[m];
      const auto cov = load_covariates(dir / "covariates.csv");
      const auto obs = load_observations(dir / "observations.csv", cov).set;
      const auto truth = load_truth(dir / "truth.csv", cov);
      const Eigen::VectorXd lam = truth.log_lambda.row(0).array().exp();
      const Hyperpriors hyper = default_hyperpriors(obs, cov);
      McmcConfig cfg;
      cfg.n_iterations = 50000;
      cfg.burn_in = 20000;
      cfg.thin = 10;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.loglambda_stride = 1 << 30;
      auto& f = results.fits[m][static_cast<std::size_t>(s - 1)];
      for (auto variant : {ModelVariant::non_preferential, ModelVariant::preferential}) {
        cfg.variant = variant;
        const auto t0 = std::chrono::steady_clock::now();
        const auto draws = run_chain(obs, cov, hyper, cfg);
        results.max_fit_seconds = std::max(results.max_fit_seconds, seconds_since(t0));
        const Eigen::VectorXd est = draws.abundance_mean.row(0).transpose();
        const double r = rmse_abundance(std::span<const double>(est.data(), static_cast<std::size_t>(est.size())),
                                        std::span<const double>(lam.data(), static_cast<std::size_t>(lam.size())));
        if (variant == ModelVariant::preferential) {
          f.rmse_pref = r;
          f.theta1 = theta1_preferential_test(draws);
        } else {
          f.rmse_non = r;
        }
      }
      std::cerr << fmt::format("  seed {:2d} {:20s} n={:4d} rmse non={:.3f} pref={:.3f} theta1=[{:.2f},{:.2f}] P+={:.3f}\n", s,
                               results.mechanisms[m], obs.n_observed(), f.rmse_non, f.rmse_pref, f.theta1.lower,
                               f.theta1.upper, f.theta1.p_positive);
    }
  }
  fs::remove_all(root);
  return results;
}

Outcome criterion_1() {
  const auto& r = simulation_study();
  int sw = 0, lg = 0, rnd = 0;
  double mean[3][2] = {};
  for (std::size_t s = 0; s < r.fits[0].size(); ++s) {
    const auto& a = r.fits[0][s];
    if (std::abs(a.rmse_pref - a.rmse_non) <= 0.10 * std::min(a.rmse_pref, a.rmse_non)) ++rnd;
    if (r.fits[1][s].rmse_pref < r.fits[1][s].rmse_non) ++sw;
    if (r.fits[2][s].rmse_pref < r.fits[2][s].rmse_non) ++lg;
    for (int m = 0; m < 3; ++m) {
      mean[m][0] += r.fits[static_cast<std::size_t>(m)][s].rmse_non / 10.0;
      mean[m][1] += r.fits[static_cast<std::size_t>(m)][s].rmse_pref / 10.0;
    }
  }
  const bool ok = sw >= 8 && lg >= 8 && rnd >= 8 && r.max_fit_seconds < 900.0;
  return {ok, fmt::format("pref<non: switch {}/10, logistic {}/10; random within 10%: {}/10; mean RMSE non/pref "
                          "random {:.2f}/{:.2f} switch {:.2f}/{:.2f} logistic {:.2f}/{:.2f}; slowest fit {:.1f}s",
                          sw, lg, rnd, mean[0][0], mean[0][1], mean[1][0], mean[1][1], mean[2][0], mean[2][1],
                          r.max_fit_seconds)};
}

Outcome criterion_2() {
  const auto& r = simulation_study();
  int covers = 0, positive = 0;
  for (std::size_t s = 0; s < r.fits[0].size(); ++s) {
    const auto& t = r.fits[0][s].theta1;
    if (t.lower <= 0.0 && 0.0 <= t.upper) ++covers;
    if (r.fits[2][s].theta1.p_positive > 0.95) ++positive;
  }
  return {covers >= 9 && positive >= 9,
          fmt::format("random: 95% interval contains 0 in {}/10; logistic: P(theta1>0)>0.95 in {}/10", covers,
                      positive)};
}

// ---------------------------------------------------------------------------
// 3: conjugate updates against closed-form conditionals

Outcome criterion_3() {
  const int n_draws = 50000;
  std::vector<MomentCheck> checks;
  Rng rng(2024, 7);

  // Shared micro instance: 2 species, intercept + one covariate, 8 days.
  const auto cov = simple_design({0.3, 1.1, -0.4, 2.0, 0.8, -1.5, 0.1, 1.7});
  const Index N = 8, J = 2, p = 2;
  LatentState state;
  state.log_lambda.resize(J, N);
  state.log_lambda << 0.2, 0.9, -0.1, 1.4, 0.7, -0.8, 0.3, 1.2,  //
      1.5, 1.1, 1.9, 2.4, 1.6, 0.9, 1.3, 2.2;
  ModelParams params;
  params.alpha = Eigen::Vector2d(0.55, -0.3);
  params.beta.resize(J, p);
  params.beta << 0.4, 0.5, 1.2, 0.2;
  params.sigma2 = 0.35;
  params.theta = Eigen::Vector2d(-0.4, 1.1);
  params.lambda_tilde = 6.0;
  params.mu_beta = Eigen::Vector2d(0.3, 0.1);
  params.sigma_beta.resize(p, p);
  params.sigma_beta << 0.8, 0.2, 0.2, 0.5;
  Hyperpriors hyper = Hyperpriors::defaults(J, p, 20.0);
  hyper.mu_alpha = Eigen::Vector2d(0.1, -0.2);
  hyper.sigma2_alpha = 0.7;
  hyper.mu_theta = Eigen::Vector2d(0.2, -0.1);
  hyper.Sigma_theta << 1.5, 0.3, 0.3, 2.0;
  hyper.q = 3.0;
  hyper.r = 0.4;
  hyper.mu0 = Eigen::Vector2d(-0.2, 0.4);
  hyper.Sigma0 << 2.0, -0.3, -0.3, 1.0;
  hyper.Psi << 1.2, 0.1, 0.1, 0.9;
  hyper.nu = 9.0;

  std::vector<double> totals(N);
  for (Index i = 0; i < N; ++i) totals[i] = std::exp(state.log_lambda(0, i)) + std::exp(state.log_lambda(1, i));

  // z
  {
    ObservationSet obs;
    obs.tau = {1, 0, 1, 1, 0, 0, 1, 0};
    std::vector<std::vector<double>> z(N);
    for (int d = 0; d < n_draws; ++d) {
      const auto v = update_z(state, params, obs, rng);
      for (Index i = 0; i < N; ++i) z[i].push_back(v(i));
    }
    for (Index i = 0; i < N; ++i) {
      const double m = params.theta(0) + (totals[i] >= params.lambda_tilde ? params.theta(1) : 0.0);
      const auto [mean, var] = obs.tau[i] ? truncated_moments(m, 0.0, INFINITY) : truncated_moments(m, -INFINITY, 0.0);
      checks.push_back(moment_check("z[" + std::to_string(i) + "]", z[i], mean, var));
    }
  }
  // theta
  {
    Eigen::VectorXd zfix(N);
    zfix << 0.4, -0.9, 1.3, 0.2, -0.1, -1.4, 0.8, -0.5;
    Eigen::MatrixXd D(N, 2);
    for (Index i = 0; i < N; ++i) D.row(i) << 1.0, totals[i] >= params.lambda_tilde ? 1.0 : 0.0;
    const Eigen::Matrix2d prior_prec = hyper.Sigma_theta.inverse();
    const Eigen::Matrix2d cov_post = (prior_prec + D.transpose() * D).inverse();
    const Eigen::Vector2d mean_post = cov_post * (prior_prec * hyper.mu_theta + D.transpose() * zfix);
    std::vector<std::vector<double>> th(2);
    for (int d = 0; d < n_draws; ++d) {
      const auto v = update_theta(zfix, state, params, hyper, rng);
      th[0].push_back(v(0));
      th[1].push_back(v(1));
    }
    for (int k = 0; k < 2; ++k)
      checks.push_back(moment_check("theta[" + std::to_string(k) + "]", th[k], mean_post(k), cov_post(k, k)));
  }
  // beta
  {
    const Eigen::MatrixXd prior_prec = params.sigma_beta.inverse();
    std::vector<std::vector<double>> b(J * p);
    for (int d = 0; d < n_draws; ++d) {
      const auto v = update_beta(state, params, cov, hyper, rng);
      for (Index j = 0; j < J; ++j)
        for (Index l = 0; l < p; ++l) b[j * p + l].push_back(v(j, l));
    }
    for (Index j = 0; j < J; ++j) {
      const double a = params.alpha(j);
      Eigen::MatrixXd V(N - 1, p);
      Eigen::VectorXd y(N - 1);
      for (Index i = 1; i < N; ++i) {
        V.row(i - 1) = cov.values.row(i) - a * cov.values.row(i - 1);
        y(i - 1) = state.log_lambda(j, i) - a * state.log_lambda(j, i - 1);
      }
      const Eigen::MatrixXd C = (prior_prec + V.transpose() * V / params.sigma2).inverse();
      const Eigen::VectorXd m = C * (prior_prec * params.mu_beta + V.transpose() * y / params.sigma2);
      for (Index l = 0; l < p; ++l)
        checks.push_back(moment_check(fmt::format("beta[{},{}]", j, l), b[j * p + l], m(l), C(l, l)));
    }
  }
  // alpha, untruncated
  {
    std::vector<std::vector<double>> al(J);
    for (int d = 0; d < n_draws; ++d) {
      const auto v = update_alpha(state, params, cov, hyper, rng, false);
      for (Index j = 0; j < J; ++j) al[j].push_back(v(j));
    }
    for (Index j = 0; j < J; ++j) {
      double sxx = 0.0, sxy = 0.0;
      for (Index i = 1; i < N; ++i) {
        const double prev = state.log_lambda(j, i - 1) - params.beta.row(j).dot(cov.values.row(i - 1));
        const double cur = state.log_lambda(j, i) - params.beta.row(j).dot(cov.values.row(i));
        sxx += prev * prev;
        sxy += prev * cur;
      }
      const double var = 1.0 / (1.0 / hyper.sigma2_alpha + sxx / params.sigma2);
      const double mean = var * (hyper.mu_alpha(j) / hyper.sigma2_alpha + sxy / params.sigma2);
      checks.push_back(moment_check("alpha[" + std::to_string(j) + "]", al[j], mean, var));
    }
  }
  // sigma2
  {
    double ss = 0.0;
    for (Index j = 0; j < J; ++j)
      for (Index i = 1; i < N; ++i) {
        const double prev = state.log_lambda(j, i - 1) - params.beta.row(j).dot(cov.values.row(i - 1));
        const double cur = state.log_lambda(j, i) - params.beta.row(j).dot(cov.values.row(i));
        const double e = cur - params.alpha(j) * prev;
        ss += e * e;
      }
    const double shape = hyper.q + 0.5 * static_cast<double>(J * (N - 1));
    const double rate = hyper.r + 0.5 * ss;
    std::vector<double> s2;
    for (int d = 0; d < n_draws; ++d) s2.push_back(update_sigma2(state, params, cov, hyper, rng));
    checks.push_back(moment_check("sigma2", s2, rate / (shape - 1.0),
                                  rate * rate / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0))));
  }
  // mu_beta, then Sigma_beta given the drawn mu_beta
  {
    ModelParams hp = params;
    hp.beta.resize(3, p);
    hp.beta << 0.4, 0.5, 1.2, 0.2, -0.3, 0.7;
    const double Jh = 3.0;
    const Eigen::MatrixXd Si = hp.sigma_beta.inverse();
    const Eigen::MatrixXd S0i = hyper.Sigma0.inverse();
    const Eigen::MatrixXd C = (S0i + Jh * Si).inverse();
    const Eigen::VectorXd m = C * (S0i * hyper.mu0 + Si * hp.beta.colwise().sum().transpose());
    std::vector<std::vector<double>> mu(p), r(3);
    const double df = hyper.nu + Jh;
    const double pp = static_cast<double>(p);
    for (int d = 0; d < n_draws; ++d) {
      const auto v = update_beta_hyper(hp, hyper, rng);
      for (Index l = 0; l < p; ++l) mu[l].push_back(v.mu_beta(l));
      Eigen::MatrixXd S = hyper.Psi;
      for (Index j = 0; j < 3; ++j) {
        const Eigen::VectorXd e = hp.beta.row(j).transpose() - v.mu_beta;
        S += e * e.transpose();
      }
      // Inverse-Wishart entry moments.
      const double c = df - pp - 1.0;
      const int idx[3][2] = {{0, 0}, {1, 1}, {0, 1}};
      for (int k = 0; k < 3; ++k) {
        const int a = idx[k][0], b = idx[k][1];
        const double e = S(a, b) / c;
        const double var = ((df - pp + 1.0) * S(a, b) * S(a, b) + (df - pp - 1.0) * S(a, a) * S(b, b)) /
                           ((df - pp) * c * c * (df - pp - 3.0));
        r[k].push_back((v.sigma_beta(a, b) - e) / std::sqrt(var));
      }
    }
    for (Index l = 0; l < p; ++l) checks.push_back(moment_check("mu_beta[" + std::to_string(l) + "]", mu[l], m(l), C(l, l)));
    const char* names[3] = {"Sigma_beta[0,0]", "Sigma_beta[1,1]", "Sigma_beta[0,1]"};
    for (int k = 0; k < 3; ++k) checks.push_back(moment_check(std::string(names[k]) + " standardized", r[k], 0.0, 1.0));
  }
  return summarize_checks(checks, 3.0);
}

// ---------------------------------------------------------------------------
// 4: Metropolis blocks against grid integration

Outcome criterion_4() {
  const Index sweeps = 100000;
  // log lambda on a three-day, one-species instance, preferential variant.
  const auto cov = simple_design({0.5, 1.5, -0.5});
  ModelParams params;
  params.alpha = Eigen::VectorXd::Constant(1, 0.6);
  params.beta.resize(1, 2);
  params.beta << 0.5, 0.3;
  params.sigma2 = 0.4;
  params.theta = Eigen::Vector2d(-0.2, 1.0);
  params.lambda_tilde = 2.0;
  params.mu_beta = Eigen::Vector2d::Zero();
  params.sigma_beta = Eigen::Matrix2d::Identity();
  params.z = Eigen::Vector3d(0.8, -0.5, 0.3);
  Hyperpriors hyper = Hyperpriors::defaults(1, 2, 10.0);
  hyper.mu1(0) = 0.0;
  hyper.sigma2_1 = 1.0;
  ObservationSet obs;
  obs.tau = {1, 0, 1};
  obs.observed_days = {0, 2};
  obs.counts.resize(1, 2);
  obs.counts << 3, 0;
  obs.effort = Eigen::Vector2d(1.0, 2.0);

  // Independent log density pieces.
  const double trend[3] = {0.5 + 0.3 * 0.5, 0.5 + 0.3 * 1.5, 0.5 - 0.3 * 0.5};
  auto unary = [&](int day, double l) {
    double v = 0.0;
    if (day == 0) v += -0.5 * l * l / hyper.sigma2_1 + 3.0 * l - std::exp(l);
    if (day == 2) v += 0.0 * l - 2.0 * std::exp(l);
    const double m = params.theta(0) + (std::exp(l) >= params.lambda_tilde ? params.theta(1) : 0.0);
    v += -0.5 * (params.z(day) - m) * (params.z(day) - m);
    return v;
  };
  auto pair = [&](int day, double prev, double cur) {
    const double e = (cur - trend[day]) - params.alpha(0) * (prev - trend[day - 1]);
    return -0.5 * e * e / params.sigma2;
  };
  const int G = 2400;
  const double lo = -9.0, hi = 6.0, h = (hi - lo) / (G - 1);
  std::vector<double> grid(G);
  for (int g = 0; g < G; ++g) grid[g] = lo + h * g;
  std::vector<double> u0(G), u1(G), u2(G);
  for (int g = 0; g < G; ++g) {
    u0[g] = std::exp(unary(0, grid[g]));
    u1[g] = std::exp(unary(1, grid[g]));
    u2[g] = std::exp(unary(2, grid[g]));
  }
  // forward message into day 1 and backward message into day 1
  std::vector<double> fwd1(G, 0.0), bwd1(G, 0.0), fwd2(G, 0.0), bwd0(G, 0.0);
  for (int b = 0; b < G; ++b)
    for (int a = 0; a < G; ++a) {
      fwd1[b] += u0[a] * std::exp(pair(1, grid[a], grid[b]));
      bwd1[a] += std::exp(pair(2, grid[a], grid[b])) * u2[b];
    }
  for (int b = 0; b < G; ++b)
    for (int a = 0; a < G; ++a) fwd2[b] += fwd1[a] * u1[a] * std::exp(pair(2, grid[a], grid[b]));
  for (int a = 0; a < G; ++a)
    for (int b = 0; b < G; ++b) bwd0[a] += std::exp(pair(1, grid[a], grid[b])) * u1[b] * bwd1[b];
  std::vector<std::vector<double>> dens(3, std::vector<double>(G));
  for (int g = 0; g < G; ++g) {
    dens[0][g] = u0[g] * bwd0[g];
    dens[1][g] = fwd1[g] * u1[g] * bwd1[g];
    dens[2][g] = fwd2[g] * u2[g];
  }
  auto to_cdf = [](const std::vector<double>& d) {
    std::vector<double> c(d.size(), 0.0);
    for (std::size_t k = 1; k < d.size(); ++k) c[k] = c[k - 1] + 0.5 * (d[k] + d[k - 1]);
    for (auto& v : c) v /= c.back();
    return c;
  };

  LatentState state;
  state.log_lambda = Eigen::MatrixXd::Zero(1, 3);
  Eigen::MatrixXd log_sd = Eigen::MatrixXd::Constant(1, 3, std::log(1.0));
  Rng rng(77, 3);
  std::vector<std::vector<double>> samples(3);
  for (Index s = 0; s < sweeps + 2000; ++s) {
    update_loglambda(state, params, obs, cov, hyper, ModelVariant::preferential, log_sd, rng);
    if (s < 2000) continue;
    for (int d = 0; d < 3; ++d) samples[d].push_back(state.log_lambda(0, d));
  }
  double ks_ll = 0.0;
  for (int d = 0; d < 3; ++d) ks_ll = std::max(ks_ll, ks_distance(samples[d], grid, to_cdf(dens[d])));

  // Threshold on fixed totals.
  LatentState fixed;
  fixed.log_lambda.resize(1, 3);
  const double tot[3] = {0.7, 2.5, 6.0};
  for (int i = 0; i < 3; ++i) fixed.log_lambda(0, i) = std::log(tot[i]);
  ModelParams tp = params;
  tp.z = Eigen::Vector3d(-0.4, 0.9, 1.3);
  tp.theta = Eigen::Vector2d(-0.3, 1.1);
  Hyperpriors th = hyper;
  th.alpha_lambda = 2.0;
  th.beta_lambda = 0.5;
  const int GT = 400000;
  const double tmax = 60.0;
  std::vector<double> tgrid(GT), tdens(GT);
  for (int g = 0; g < GT; ++g) {
    const double x = tmax * (g + 1) / GT;
    tgrid[g] = x;
    double v = (th.alpha_lambda - 1.0) * std::log(x) - th.beta_lambda * x;
    for (int i = 0; i < 3; ++i) {
      const double m = tp.theta(0) + (tot[i] >= x ? tp.theta(1) : 0.0);
      v += -0.5 * (tp.z(i) - m) * (tp.z(i) - m);
    }
    tdens[g] = std::exp(v);
  }
  std::vector<double> tsample;
  for (Index s = 0; s < sweeps + 2000; ++s) {
    tp.lambda_tilde = update_lambda_tilde(fixed, tp, th, 0.8, rng).value;
    if (s >= 2000) tsample.push_back(tp.lambda_tilde);
  }
  const double ks_t = ks_distance(tsample, tgrid, to_cdf(tdens));
  return {ks_ll < 0.02 && ks_t < 0.02,
          fmt::format("KS log lambda (worst day) = {:.4f}, KS threshold = {:.4f}, limit 0.02", ks_ll, ks_t)};
}

// ---------------------------------------------------------------------------
// 5: growth-rate median and the Malthusian identity

Outcome criterion_5() {
  const auto cov = simple_design({4.0, 9.0});
  const Eigen::Vector2d beta(0.2, 0.25);
  const double alpha = 0.8, sigma2 = 0.25, l_prev = 0.3;
  // Closed form: exp(beta (x_t - alpha x_{t-1}) + (alpha - 1) l_prev) - 1.
  const double drive = (0.2 + 0.25 * 9.0) - alpha * (0.2 + 0.25 * 4.0);
  const double closed = std::exp(drive + (alpha - 1.0) * l_prev) - 1.0;
  const double lib = growth_rate_median(alpha, beta, cov, std::exp(l_prev), 1);

  ModelParams p;
  p.alpha = Eigen::VectorXd::Constant(1, alpha);
  p.beta = beta.transpose();
  p.sigma2 = sigma2;
  const double mean_next = process_mean(p, cov, Eigen::VectorXd::Constant(1, l_prev), 1)(0);
  Rng rng(5, 11);
  const int n = 1000000;
  std::vector<double> g(n);
  double worst_identity = 0.0;
  for (int k = 0; k < n; ++k) {
    const double l_next = mean_next + std::sqrt(sigma2) * rng.normal();
    g[k] = std::expm1(l_next - l_prev);
    const double lam_prev = std::exp(l_prev), lam_next = std::exp(l_next);
    worst_identity = std::max(worst_identity, std::abs((1.0 + g[k]) * lam_prev - lam_next) / lam_next);
  }
  std::nth_element(g.begin(), g.begin() + n / 2, g.end());
  const double mc = g[n / 2];
  const double rel = std::abs(mc - closed) / std::abs(closed);
  const bool ok = rel < 0.005 && std::abs(lib - closed) < 1e-12 && worst_identity < 1e-12;
  return {ok, fmt::format("closed form {:.6f}, library {:.6f}, MC median {:.6f} (rel. diff {:.4f}, limit 0.005); "
                          "max identity error {:.2e}",
                          closed, lib, mc, rel, worst_identity)};
}

// ---------------------------------------------------------------------------
// 6: covariate oracles

Outcome criterion_6() {
  std::mt19937_64 eng(6);
  std::normal_distribution<double> nd(12.0, 9.0);
  std::vector<double> raw(3000);
  for (auto& v : raw) v = nd(eng);
  double worst = 0.0;
  for (int w : {1, 2, 7, 14, 30, 90, 365}) {
    const auto fast = convolve_backward_box(raw, w).values;
    for (std::size_t t = 0; t < raw.size(); ++t) {
      double s = 0.0;
      int k = 0;
      for (int lag = 1; lag <= w && static_cast<int>(t) - lag >= 0; ++lag, ++k) s += raw[t - static_cast<std::size_t>(lag)];
      const double naive = t == 0 ? raw[0] : s / k;
      worst = std::max(worst, std::abs(fast[t] - naive));
    }
  }
  std::vector<double> temps;
  for (int k = 0; k < 998; ++k) temps.push_back(-15.0 + 60.0 * k / 997.0);
  temps.push_back(10.0);
  temps.push_back(30.0);
  int mismatches = 0;
  for (double t : temps) {
    const double expected = t <= 10.0 ? 0.0 : (t >= 30.0 ? 20.0 : t - 10.0);
    if (growing_degree_days(t) != expected) ++mismatches;
  }
  return {worst <= 1e-10 && mismatches == 0,
          fmt::format("max |cumsum - naive| = {:.2e} (limit 1e-10); GDD mismatches {}/{}", worst, mismatches,
                      temps.size())};
}

// ---------------------------------------------------------------------------
// 7: probit layer by forward simulation

Outcome criterion_7() {
  struct Case {
    Eigen::Vector2d theta;
    double total, tilde;
  };
  const std::vector<Case> cases{{{-0.3, 1.2}, 5.0, 3.0}, {{0.5, -1.0}, 4.0, 3.0}, {{-1.0, 2.0}, 3.0, 3.0},
                                {{0.0, 0.7}, 1.0, 3.0},  {{-2.2, 0.4}, 9.0, 1.0}};
  Rng rng(7, 1);
  const int n = 1000000;
  double worst = 0.0;
  for (const auto& c : cases) {
    const double mean = c.theta(0) + (c.total >= c.tilde ? c.theta(1) : 0.0);
    int kept = 0;
    for (int k = 0; k < n; ++k) kept += (mean + rng.normal()) > 0.0 ? 1 : 0;
    const double emp = static_cast<double>(kept) / n;
    worst = std::max(worst, std::abs(emp - inclusion_probability(c.theta, c.total, c.tilde)));
  }
  return {worst < 0.005, fmt::format("{} configurations, max |empirical - analytic| = {:.5f} (limit 0.005)",
                                     cases.size(), worst)};
}

// ---------------------------------------------------------------------------
// 8: zero-drop scenario

Outcome criterion_8() {
  const auto root = scratch("zerodrop");
  const std::string data = (root / "data").string();
  if (cli({"simulate", "--preset", "mosquito", "--seed", "1", "--out", data}) != 0) return {false, "simulate failed"};
  struct Run {
    std::string variant;
    bool drop;
    fs::path derived;
  };
  std::vector<Run> runs;
  for (const char* v : {"nonpref", "pref"})
    for (bool drop : {false, true}) {
      const std::string tag = std::string(v) + (drop ? "_drop" : "_full");
      const fs::path fit = root / ("fit_" + tag), der = root / ("der_" + tag);
      std::vector<std::string> args{"fit",         "--data",      data, "--out",  fit.string(), "--variant", v,
                                    "--iterations", "50000",      "--burn-in", "20000", "--thin", "10", "--seed",
                                    "1",           "--rhat-limit", "1000"};
      if (drop) args.push_back("--drop-zero-days");
      if (cli(args) != 0) return {false, "fit failed: " + tag};
      if (cli({"derive", "--draws", fit.string(), "--out", der.string()}) != 0) return {false, "derive failed: " + tag};
      runs.push_back({v, drop, der});
    }
  const auto cov = load_covariates(fs::path(data) / "covariates.csv");
  const auto dropped = load_observations(root / "fit_nonpref_drop" / "observations.csv", cov).set;
  std::set<int> winter_days;
  for (Index i = 0; i < cov.n_days(); ++i) {
    const int month = std::stoi(cov.dates[static_cast<std::size_t>(i)].substr(5, 2));
    if (!dropped.tau[static_cast<std::size_t>(i)] && (month == 12 || month <= 2))
      winter_days.insert(cov.day_index[static_cast<std::size_t>(i)]);
  }
  auto winter_median = [&](const fs::path& der) {
    const auto t = read_csv(der / "summary.csv");
    const auto cd = t.require_column("day"), cm = t.require_column("median");
    double s = 0.0;
    int n = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (winter_days.count(static_cast<int>(t.integer(r, cd)))) {
        s += t.number(r, cm);
        ++n;
      }
    return s / n;
  };
  auto psi_medians = [&](const fs::path& der) {
    const auto t = read_csv(der / "psi_summary.csv");
    const auto cm = t.require_column("median");
    std::vector<double> v;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& s = t.text(r, cm);
      v.push_back(s == "nan" || s == "NA" || s.empty() ? std::nan("") : t.number(r, cm));
    }
    return v;
  };
  auto shift = [&](const std::string& v) {
    const auto a = psi_medians(root / ("der_" + v + "_full"));
    const auto b = psi_medians(root / ("der_" + v + "_drop"));
    double s = 0.0;
    for (std::size_t y = 0; y < a.size(); ++y) s += std::abs(a[y] - b[y]);
    return std::pair{s / static_cast<double>(a.size()), fmt::format("{}", fmt::join(a, "/")) + " -> " +
                                                           fmt::format("{}", fmt::join(b, "/"))};
  };
  const double w_non = winter_median(root / "der_nonpref_drop");
  const double w_pref = winter_median(root / "der_pref_drop");
  const auto [s_non, d_non] = shift("nonpref");
  const auto [s_pref, d_pref] = shift("pref");
  std::cerr << "  psi medians non-preferential " << d_non << "\n  psi medians preferential " << d_pref << "\n";
  const double ratio = w_non / w_pref;
  const bool ok = ratio >= 2.0 && s_pref < 10.0 && s_non > s_pref;
  fs::remove_all(root);
  return {ok, fmt::format("{} unobserved winter days; median abundance non-pref {:.4f} vs pref {:.4f} (ratio {:.2f}, "
                          "need >= 2); mean |psi shift| pref {:.1f} d (need < 10), non-pref {:.1f} d (need > pref)",
                          winter_days.size(), w_non, w_pref, ratio, s_pref, s_non)};
}

// ---------------------------------------------------------------------------
// 9: interval calibration

Outcome criterion_9() {
  const int reps = 100;
  const auto raw = with_growing_degree_days(synthetic_temperature(2014, 1, 1));
  const auto full = build_design(raw, {{"gdd", 14, KernelKind::backward_box}}, true);
  CovariateSeries cov;
  const Index first = 60, N = 200;
  cov.values = full.values.middleRows(first, N);
  cov.day_index.assign(full.day_index.begin() + first, full.day_index.begin() + first + N);
  cov.dates.assign(full.dates.begin() + first, full.dates.begin() + first + N);
  cov.names = full.names;
  cov.warmup.assign(static_cast<std::size_t>(N), false);
  const ModelParams truth = reference_simulation_params();
  const double true_values[4] = {truth.alpha(0), truth.beta(0, 0), truth.beta(0, 1), truth.sigma2};
  const char* names[4] = {"alpha", "beta0", "beta1", "sigma2"};
  int covered[4] = {0, 0, 0, 0};
  for (int r = 1; r <= reps; ++r) {
    const auto sim = simulate_dataset(truth, cov, trend_anchored_init(truth, cov), Eigen::VectorXd::Ones(N),
                                      SamplingMechanism::random(1.0), static_cast<std::uint64_t>(r));
    McmcConfig cfg;
    cfg.n_iterations = 20000;
    cfg.burn_in = 10000;
    cfg.thin = 10;
    cfg.seed = static_cast<std::uint64_t>(r);
    cfg.variant = ModelVariant::non_preferential;
    cfg.loglambda_stride = 1 << 30;
    const auto draws = run_chain(sim.observations, cov, default_hyperpriors(sim.observations, cov), cfg);
    std::vector<std::vector<double>> v(4);
    for (const auto& d : draws.params_draws) {
      v[0].push_back(d.alpha(0));
      v[1].push_back(d.beta(0, 0));
      v[2].push_back(d.beta(0, 1));
      v[3].push_back(d.sigma2);
    }
    for (int k = 0; k < 4; ++k) {
      std::sort(v[k].begin(), v[k].end());
      if (quantile_sorted(v[k], 0.025) <= true_values[k] && true_values[k] <= quantile_sorted(v[k], 0.975))
        ++covered[k];
    }
  }
  bool ok = true;
  std::string detail = "95% interval coverage over 100 fits:";
  for (int k = 0; k < 4; ++k) {
    ok = ok && covered[k] >= 90;
    detail += fmt::format(" {} {}%", names[k], covered[k]);
  }
  return {ok, detail + " (need >= 90% each)"};
}

// ---------------------------------------------------------------------------
// 10: byte-identical reruns of every command

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

Outcome criterion_10() {
  const auto root = scratch("repro");
  {
    auto env = synthetic_temperature(2015, 2, 3);
    write_file_atomic(root / "env.csv", environment_csv(env));
  }
  const std::string w = (root / "work").string();
  const std::vector<std::vector<std::string>> commands{
      {"covariates", "--input", (root / "env.csv").string(), "--output", w + "/cov.csv", "--kernel", "gdd=14"},
      {"simulate", "--covariates", w + "/cov.csv", "--out", w + "/sim", "--seed", "9", "--mechanism", "logistic",
       "--logit-intercept", "-2", "--logit-slope", "0.3", "--alpha", "0.9", "--beta", "-1", "0.3", "--species", "2"},
      {"simulate", "--preset", "paper-sim", "--out", w + "/paper", "--seed", "2"},
      {"simulate", "--preset", "mosquito", "--out", w + "/mosq", "--seed", "2"},
      {"fit", "--data", w + "/sim", "--out", w + "/fit_pref", "--iterations", "600", "--burn-in", "200", "--thin", "4",
       "--chains", "3", "--seed", "4", "--rhat-limit", "1000"},
      {"fit", "--data", w + "/sim", "--out", w + "/fit_non", "--variant", "nonpref", "--iterations", "600",
       "--burn-in", "200", "--thin", "4", "--seed", "4", "--drop-zero-days", "--rhat-limit", "1000"},
      {"derive", "--draws", w + "/fit_pref", "--out", w + "/der_pref", "--truth", w + "/sim/truth.csv"},
      {"derive", "--draws", w + "/fit_non", "--out", w + "/der_non", "--truth", w + "/sim/truth.csv", "--psi-plugin",
       "median"},
      {"study", "--out", w + "/study", "--seed", "3", "--iterations", "300", "--burn-in", "100", "--thin", "5"},
  };
  std::string stdout_a, stdout_b;
  auto run_all = [&](std::string& log) {
    fs::remove_all(w);
    fs::create_directories(w);
    for (const auto& c : commands) {
      std::string text;
      const int code = cli(c, &text);
      if (code != 0 && code != exit_code::convergence) return false;
      log += text;
    }
    return true;
  };
  if (!run_all(stdout_a)) return {false, "a command failed on the first pass"};
  const auto first = snapshot(w);
  if (!run_all(stdout_b)) return {false, "a command failed on the second pass"};
  const auto second = snapshot(w);
  int differing = 0;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != bytes) {
      ++differing;
      std::cerr << "  differs: " << name << "\n";
    }
  }
  if (second.size() != first.size()) ++differing;
  const bool ok = differing == 0 && stdout_a == stdout_b && first.size() > 30;
  fs::remove_all(root);
  return {ok, fmt::format("{} commands, {} output files compared, {} differ; stdout {}", commands.size(), first.size(),
                          differing, stdout_a == stdout_b ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefsamp acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"simulation-study RMSE direction", criterion_1},
      {"theta1 behaviour", criterion_2},
      {"conjugate-update oracles", criterion_3},
      {"Metropolis marginals vs grid integration", criterion_4},
      {"growth-rate median and Malthusian identity", criterion_5},
      {"covariate oracles", criterion_6},
      {"probit-layer marginalization", criterion_7},
      {"zero-drop scenario", criterion_8},
      {"interval calibration", criterion_9},
      {"byte-identical reruns", criterion_10},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << fmt::format("[{}] criterion {:2d} {}: {} ({:.0f}s)", o.pass ? "PASS" : "FAIL", id, criteria[k].first,
                             o.detail, seconds_since(t0))
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
