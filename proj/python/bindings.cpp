#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "prefsamp/cli.hpp"
#include "prefsamp/covariates.hpp"
#include "prefsamp/derived.hpp"
#include "prefsamp/errors.hpp"
#include "prefsamp/inference.hpp"
#include "prefsamp/model_core.hpp"
#include "prefsamp/simulator.hpp"

namespace py = pybind11;
using namespace prefsamp;

namespace {

CovariateSeries make_covariates(const Eigen::MatrixXd& X, std::vector<std::string> names) {
  CovariateSeries cov;
  cov.values = X;
  if (names.empty()) {
    names.push_back("intercept");
    for (Eigen::Index l = 1; l < X.cols(); ++l) names.push_back("x" + std::to_string(l));
  }
  cov.names = std::move(names);
  for (Eigen::Index i = 0; i < X.rows(); ++i) cov.day_index.push_back(static_cast<int>(i + 1));
  cov.warmup.assign(static_cast<std::size_t>(X.rows()), false);
  cov.validate();
  return cov;
}

ModelParams make_params(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta, double sigma2) {
  ModelParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.sigma2 = sigma2;
  p.mu_beta = beta.colwise().mean().transpose();
  p.sigma_beta = Eigen::MatrixXd::Identity(beta.cols(), beta.cols());
  return p;
}

SamplingMechanism make_mechanism(const std::string& kind, double prob, double threshold, double intercept,
                                 double slope) {
  switch (SamplingMechanism::parse_kind(kind)) {
    case SamplingMechanism::Kind::random:
      return SamplingMechanism::random(prob);
    case SamplingMechanism::Kind::preferential_switch:
      return SamplingMechanism::preferential_switch(threshold, prob);
    case SamplingMechanism::Kind::logistic:
      return SamplingMechanism::logistic(intercept, slope);
  }
  throw ConfigError("unknown mechanism");
}

ObservationSet make_observations(Eigen::Index n_days, const std::vector<Eigen::Index>& observed_days,
                                 const CountMatrix& counts, std::optional<Eigen::VectorXd> effort) {
  ObservationSet obs;
  obs.tau.assign(static_cast<std::size_t>(n_days), 0);
  for (auto d : observed_days) {
    if (d < 0 || d >= n_days) throw IndexError("observed day outside the study");
    obs.tau[static_cast<std::size_t>(d)] = 1;
  }
  obs.observed_days = observed_days;
  obs.counts = counts;
  obs.effort = effort ? *effort : Eigen::VectorXd::Ones(counts.cols());
  obs.validate();
  return obs;
}

}  // namespace

PYBIND11_MODULE(_prefsamp, m) {
  m.doc() = "Preferential-sampling state-space models for relative abundance counts";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<IndexError>(m, "IndexError", PyExc_IndexError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("growing_degree_days", &growing_degree_days, py::arg("tmean_c"), py::arg("base_c") = 10.0,
        py::arg("cutoff_c") = 30.0);

  m.def(
      "convolve_backward_box",
      [](const std::vector<double>& raw, int window) {
        auto c = convolve_backward_box(raw, window);
        return py::make_tuple(c.values, c.truncated);
      },
      py::arg("raw"), py::arg("window_days"), "Returns (values, truncated).");

  m.def(
      "synthetic_temperature",
      [](int first_year, int n_years, std::uint64_t seed) {
        const auto raw = synthetic_temperature(first_year, n_years, seed);
        return py::make_tuple(raw.dates, raw.column("tmean_c"));
      },
      py::arg("first_year"), py::arg("n_years"), py::arg("seed"), "Returns (dates, tmean_c).");

  m.def(
      "inclusion_probability",
      [](const Eigen::VectorXd& theta, double total_abundance, double lambda_tilde) {
        if (theta.size() != 2) throw ShapeError("theta must have two entries");
        return inclusion_probability(Eigen::Vector2d(theta(0), theta(1)), total_abundance, lambda_tilde);
      },
      py::arg("theta"), py::arg("total_abundance"), py::arg("lambda_tilde"));

  m.def(
      "simulate",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta, double sigma2,
         const std::string& mechanism, double prob, double threshold, double intercept, double slope,
         std::uint64_t seed, double effort) {
        const auto cov = make_covariates(X, {});
        const auto params = make_params(alpha, beta, sigma2);
        const auto mech = make_mechanism(mechanism, prob, threshold, intercept, slope);
        const auto truth = simulate_dataset(params, cov, trend_anchored_init(params, cov),
                                            Eigen::VectorXd::Constant(cov.n_days(), effort), mech, seed);
        py::dict out;
        out["log_lambda"] = truth.state.log_lambda;
        out["full_counts"] = truth.full_counts;
        out["tau"] = truth.observations.tau;
        out["observed_days"] = truth.observations.observed_days;
        out["counts"] = truth.observations.counts;
        out["warnings"] = truth.warnings;
        return out;
      },
      py::arg("X"), py::arg("alpha"), py::arg("beta"), py::arg("sigma2"), py::arg("mechanism") = "random",
      py::arg("prob") = 1.0, py::arg("threshold") = 15.0, py::arg("intercept") = -10.0, py::arg("slope") = 0.4,
      py::arg("seed") = 1, py::arg("effort") = 1.0,
      "Simulates latent log abundance, Poisson counts and the retained days. X is N x p with an intercept "
      "column first.");

  m.def(
      "fit",
      [](const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& observed_days, const CountMatrix& counts,
         const std::string& variant, Eigen::Index n_iterations, Eigen::Index burn_in, Eigen::Index thin,
         std::uint64_t seed, Eigen::Index n_chains, std::optional<Eigen::VectorXd> effort) {
        const auto cov = make_covariates(X, {});
        const auto obs = make_observations(cov.n_days(), observed_days, counts, std::move(effort));
        McmcConfig config;
        config.variant = parse_variant(variant);
        config.n_iterations = n_iterations;
        config.burn_in = burn_in;
        config.thin = thin;
        config.seed = seed;
        config.n_chains = n_chains;
        std::vector<PosteriorDraws> chains;
        {
          py::gil_scoped_release release;
          chains = run_chains(obs, cov, default_hyperpriors(obs, cov), config);
        }
        const auto names = parameter_names(config.variant, obs.n_species(), cov.n_covariates());
        std::size_t total = 0;
        for (const auto& c : chains) total += c.params_draws.size();
        Eigen::MatrixXd params(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(names.size()));
        Eigen::MatrixXd abundance = Eigen::MatrixXd::Zero(obs.n_species(), cov.n_days());
        std::vector<Eigen::Index> chain_of;
        Eigen::Index row = 0;
        for (const auto& c : chains) {
          for (const auto& d : c.params_draws) {
            const auto flat = flatten_parameters(d, config.variant);
            for (std::size_t q = 0; q < flat.size(); ++q) params(row, static_cast<Eigen::Index>(q)) = flat[q];
            chain_of.push_back(c.chain);
            ++row;
          }
          abundance += static_cast<double>(c.params_draws.size()) * c.abundance_mean;
        }
        if (total > 0) abundance /= static_cast<double>(total);
        py::dict diag;
        for (const auto& d : chains.front().diagnostics) diag[py::str(d.name)] = py::make_tuple(d.ess, d.rhat);
        py::dict out;
        out["names"] = names;
        out["params"] = params;
        out["chain"] = chain_of;
        out["abundance_mean"] = abundance;
        out["acceptance"] = chains.front().acceptance_rates;
        out["diagnostics"] = diag;
        return out;
      },
      py::arg("X"), py::arg("observed_days"), py::arg("counts"), py::arg("variant") = "pref",
      py::arg("n_iterations") = 50000, py::arg("burn_in") = 20000, py::arg("thin") = 10, py::arg("seed") = 1,
      py::arg("n_chains") = 1, py::arg("effort") = py::none(),
      "Runs the Gibbs sampler. observed_days are 0-based rows of X; counts is J x n.");

  m.def(
      "growth_rate_median",
      [](double alpha_j, const Eigen::VectorXd& beta_j, const Eigen::MatrixXd& X, double lambda_prev,
         Eigen::Index day) { return growth_rate_median(alpha_j, beta_j, make_covariates(X, {}), lambda_prev, day); },
      py::arg("alpha_j"), py::arg("beta_j"), py::arg("X"), py::arg("lambda_prev"), py::arg("day"));

  m.def(
      "phenometric_psi",
      [](double alpha, const Eigen::VectorXd& beta, const Eigen::MatrixXd& X, const Eigen::VectorXd& log_lambda,
         Eigen::Index start, Eigen::Index end) -> std::optional<Eigen::Index> {
        ModelParams p = make_params(Eigen::VectorXd::Constant(1, alpha), beta.transpose(), 1.0);
        LatentState s;
        s.log_lambda = log_lambda.transpose();
        return phenometric_psi(p, s, make_covariates(X, {}), 0, start, end);
      },
      py::arg("alpha"), py::arg("beta"), py::arg("X"), py::arg("log_lambda"), py::arg("window_start"),
      py::arg("window_end"), "Single-species phenometric; returns None when growth never turns positive.");

  m.def(
      "rmse_abundance",
      [](const std::vector<double>& estimate, const std::vector<double>& truth) {
        return rmse_abundance(estimate, truth);
      },
      py::arg("estimate"), py::arg("truth"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a prefsamp command; returns (exit_code, stdout, stderr).");
}
