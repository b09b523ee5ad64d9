#include "prefsamp/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "prefsamp/covariates.hpp"
#include "prefsamp/csv.hpp"
#include "prefsamp/derived.hpp"
#include "prefsamp/errors.hpp"
#include "prefsamp/inference.hpp"
#include "prefsamp/io.hpp"
#include "prefsamp/math.hpp"
#include "prefsamp/simulator.hpp"

namespace fs = std::filesystem;

namespace prefsamp {

namespace {

// ---------------------------------------------------------------------------
// Small helpers

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ValidationError(what + " '" + path.string() + "' does not exist");
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string join(const std::vector<std::string>& parts, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double x : v) parts.push_back(format_double(x));
  return join(parts);
}

std::string lookup(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& file) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError(file.string() + ": missing key '" + key + "'");
  return it->second;
}

KernelSpec parse_kernel(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
    throw ConfigError("kernel '" + text + "': expected COLUMN=WINDOW or COLUMN=raw");
  KernelSpec spec;
  spec.column = text.substr(0, eq);
  const std::string w = text.substr(eq + 1);
  if (w == "raw") {
    spec.kind = KernelKind::identity;
    spec.window_days = 1;
    return spec;
  }
  try {
    std::size_t used = 0;
    spec.window_days = std::stoi(w, &used);
    if (used != w.size()) throw std::invalid_argument(w);
  } catch (const std::exception&) {
    throw ConfigError("kernel '" + text + "': window must be an integer or 'raw'");
  }
  if (spec.window_days < 1) throw ConfigError("kernel '" + text + "': window must be >= 1");
  spec.kind = KernelKind::backward_box;
  return spec;
}

std::uint64_t dataset_fingerprint(const fs::path& observations, const fs::path& covariates) {
  return fingerprint(read_file(observations) + '\x1f' + read_file(covariates));
}

// ---------------------------------------------------------------------------
// covariates

struct CovariatesArgs {
  std::string input;
  std::string output;
  std::vector<std::string> kernels{"gdd=14"};
  double gdd_base = 10.0;
  double gdd_cutoff = 30.0;
};

CovariateSeries design_from_environment(const RawEnvironmentSeries& raw, const std::vector<std::string>& kernels,
                                        double base, double cutoff) {
  std::vector<KernelSpec> specs;
  for (const auto& k : kernels) specs.push_back(parse_kernel(k));
  return build_design(with_growing_degree_days(raw, base, cutoff), specs, true);
}

void cmd_covariates(const CovariatesArgs& a, std::ostream& out) {
  require_file(a.input, "environment file");
  const CovariateSeries cov = design_from_environment(load_environment(a.input), a.kernels, a.gdd_base, a.gdd_cutoff);
  const fs::path target(a.output);
  if (target.has_parent_path()) ensure_directory(target.parent_path());
  write_file_atomic(target, covariates_csv(cov));
  const auto warm = std::count(cov.warmup.begin(), cov.warmup.end(), true);
  out << "days=" << cov.n_days() << " covariates=" << join(cov.names) << " warmup_days=" << warm << "\n";
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 1;
  std::string preset;
  std::string covariates;
  std::string temperature;
  std::vector<std::string> kernels{"gdd=14"};
  int first_year = 2014;
  int n_years = 3;
  std::uint64_t climate_seed = 1;
  std::string mechanism = "random";
  double prob = 1.0;
  double threshold = 15.0;
  double logit_intercept = -10.0;
  double logit_slope = 0.4;
  std::vector<double> alpha{0.98};
  std::vector<double> beta{0.1, 0.3};
  double sigma2 = 0.03;
  int species = 1;
  double effort = 1.0;
};

struct Scenario {
  CovariateSeries covariates;
  ModelParams params;
  std::vector<SamplingMechanism> mechanisms;
  bool subdirectories = false;
};

ModelParams params_from_args(const SimulateArgs& a, Index p) {
  const Index J = a.species;
  if (J < 1) throw ConfigError("--species must be >= 1");
  ModelParams m;
  if (a.alpha.size() == 1) {
    m.alpha = Eigen::VectorXd::Constant(J, a.alpha.front());
  } else if (static_cast<Index>(a.alpha.size()) == J) {
    m.alpha = Eigen::Map<const Eigen::VectorXd>(a.alpha.data(), J);
  } else {
    throw ConfigError("--alpha needs 1 or " + std::to_string(J) + " values");
  }
  m.beta.resize(J, p);
  if (static_cast<Index>(a.beta.size()) == p) {
    for (Index j = 0; j < J; ++j)
      for (Index l = 0; l < p; ++l) m.beta(j, l) = a.beta[static_cast<std::size_t>(l)];
  } else if (static_cast<Index>(a.beta.size()) == J * p) {
    for (Index j = 0; j < J; ++j)
      for (Index l = 0; l < p; ++l) m.beta(j, l) = a.beta[static_cast<std::size_t>(j * p + l)];
  } else {
    throw ConfigError("--beta needs " + std::to_string(p) + " (shared) or " + std::to_string(J * p) +
                      " (row-major) values for covariates " + std::to_string(p));
  }
  m.sigma2 = a.sigma2;
  m.mu_beta = m.beta.colwise().mean().transpose();
  m.sigma_beta = Eigen::MatrixXd::Identity(p, p);
  m.validate(true);
  return m;
}

SamplingMechanism mechanism_from_args(const SimulateArgs& a) {
  SamplingMechanism m;
  switch (SamplingMechanism::parse_kind(a.mechanism)) {
    case SamplingMechanism::Kind::random:
      m = SamplingMechanism::random(a.prob);
      break;
    case SamplingMechanism::Kind::preferential_switch:
      m = SamplingMechanism::preferential_switch(a.threshold, a.prob);
      break;
    case SamplingMechanism::Kind::logistic:
      m = SamplingMechanism::logistic(a.logit_intercept, a.logit_slope);
      break;
  }
  m.validate();
  return m;
}

Scenario build_scenario(const SimulateArgs& a) {
  Scenario s;
  if (a.preset == "paper-sim") {
    s.covariates = build_design(with_growing_degree_days(synthetic_temperature(2014, 3, a.climate_seed)),
                                {{"gdd", 1, KernelKind::identity}}, true);
    s.params = reference_simulation_params();
    const auto mechs = reference_sampling_mechanisms();
    s.mechanisms.assign(mechs.begin(), mechs.end());
    s.subdirectories = true;
    return s;
  }
  if (a.preset == "mosquito") {
    s.covariates = build_design(with_growing_degree_days(synthetic_temperature(2016, 4, a.climate_seed)),
                                {{"gdd", 14, KernelKind::backward_box}}, true);
    s.params = reference_simulation_params();
    // Strongly seasonal: near-zero winter abundance, summer peaks of a few dozen.
    s.params.beta << -5.0, 0.7;
    s.params.mu_beta = s.params.beta.row(0).transpose();
    s.mechanisms = {SamplingMechanism::logistic(-3.0, 0.5)};
    return s;
  }
  if (!a.preset.empty()) throw ConfigError("unknown preset '" + a.preset + "' (expected paper-sim or mosquito)");

  if (!a.covariates.empty() && !a.temperature.empty())
    throw ConfigError("--covariates and --temperature are mutually exclusive");
  if (!a.covariates.empty()) {
    require_file(a.covariates, "covariates file");
    s.covariates = load_covariates(a.covariates);
  } else {
    const RawEnvironmentSeries raw = a.temperature.empty() ? synthetic_temperature(a.first_year, a.n_years, a.climate_seed)
                                                           : (require_file(a.temperature, "environment file"),
                                                              load_environment(a.temperature));
    s.covariates = design_from_environment(raw, a.kernels, 10.0, 30.0);
  }
  s.params = params_from_args(a, s.covariates.n_covariates());
  s.mechanisms = {mechanism_from_args(a)};
  return s;
}

std::string mechanism_meta(const SamplingMechanism& m) {
  std::map<std::string, std::string> kv{{"mechanism", m.name()}};
  switch (m.kind) {
    case SamplingMechanism::Kind::random:
      kv["mechanism_prob"] = format_double(m.prob);
      break;
    case SamplingMechanism::Kind::preferential_switch:
      kv["mechanism_prob"] = format_double(m.prob);
      kv["mechanism_threshold"] = format_double(m.threshold);
      break;
    case SamplingMechanism::Kind::logistic:
      kv["mechanism_intercept"] = format_double(m.intercept);
      kv["mechanism_slope"] = format_double(m.slope);
      break;
  }
  return format_key_values(kv);
}

void cmd_simulate(const SimulateArgs& a, const std::string& resolved, std::ostream& out) {
  if (!(a.effort > 0.0)) throw ConfigError("--effort must be positive");
  const Scenario s = build_scenario(a);
  const fs::path root(a.out);
  ensure_directory(root);
  const ProcessInit init = trend_anchored_init(s.params, s.covariates);
  const Eigen::VectorXd effort = Eigen::VectorXd::Constant(s.covariates.n_days(), a.effort);
  const auto species = default_species_labels(s.params.n_species());

  for (const auto& mech : s.mechanisms) {
    const SimulationTruth truth = simulate_dataset(s.params, s.covariates, init, effort, mech, a.seed);
    const fs::path dir = s.subdirectories ? root / mech.name() : root;
    ensure_directory(dir);
    std::map<std::string, std::string> meta{
        {"seed", std::to_string(a.seed)},
        {"preset", a.preset.empty() ? "none" : a.preset},
        {"n_days", std::to_string(s.covariates.n_days())},
        {"n_observed", std::to_string(truth.observations.n_observed())},
        {"n_species", std::to_string(s.params.n_species())},
        {"alpha", join_doubles(std::vector<double>(s.params.alpha.data(), s.params.alpha.data() + s.params.alpha.size()))},
        {"sigma2", format_double(s.params.sigma2)},
        {"effort", format_double(a.effort)},
    };
    std::vector<double> beta;
    for (Index j = 0; j < s.params.beta.rows(); ++j)
      for (Index l = 0; l < s.params.beta.cols(); ++l) beta.push_back(s.params.beta(j, l));
    meta["beta"] = join_doubles(beta);

    write_file_atomic(dir / "covariates.csv", covariates_csv(s.covariates));
    write_file_atomic(dir / "truth.csv", truth_csv(truth.state, s.covariates));
    write_file_atomic(dir / "counts_full.csv", counts_full_csv(truth.full_counts, s.covariates));
    write_file_atomic(dir / "observations.csv", observations_csv(truth.observations, s.covariates, species));
    write_file_atomic(dir / "tau.csv", tau_csv(truth.observations, s.covariates));
    write_file_atomic(dir / "meta.ini", format_key_values(meta) + mechanism_meta(mech));

    double mean_count = std::nan("");
    if (truth.observations.n_observed() > 0)
      mean_count = static_cast<double>(truth.observations.counts.sum()) /
                   static_cast<double>(truth.observations.counts.size());
    out << mech.name() << ": N=" << s.covariates.n_days() << " n=" << truth.observations.n_observed()
        << " mean_count=" << format_double(mean_count) << "\n";
    for (const auto& w : truth.warnings) out << "warning: " << w << "\n";
  }
  write_file_atomic(root / "resolved_config.ini", resolved);
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data;
  std::string observations;
  std::string covariates;
  std::string out;
  std::string variant = "pref";
  Index iterations = 50000;
  Index burn_in = 20000;
  Index thin = 10;
  Index chains = 1;
  std::uint64_t seed = 1;
  double proposal_sd = 0.3;
  double proposal_sd_threshold = 0.2;
  bool no_adapt = false;
  bool no_alpha_truncation = false;
  Index loglambda_stride = 5;
  bool drop_zero_days = false;
  double rhat_limit = 1.1;
};

struct PriorOverrides {
  CLI::Option* sigma2_1 = nullptr;
  CLI::Option* beta_var = nullptr;
  CLI::Option* iw_df = nullptr;
  CLI::Option* alpha_mean = nullptr;
  CLI::Option* alpha_var = nullptr;
  CLI::Option* theta_var = nullptr;
  CLI::Option* q = nullptr;
  CLI::Option* r = nullptr;
  CLI::Option* threshold_shape = nullptr;
  CLI::Option* threshold_rate = nullptr;
  double v_sigma2_1 = 0, v_beta_var = 0, v_iw_df = 0, v_alpha_mean = 0, v_alpha_var = 0, v_theta_var = 0, v_q = 0,
         v_r = 0, v_threshold_shape = 0, v_threshold_rate = 0;

  void apply(Hyperpriors& h) const {
    const auto set = [](CLI::Option* o) { return o != nullptr && o->count() > 0; };
    if (set(sigma2_1)) h.sigma2_1 = v_sigma2_1;
    if (set(beta_var)) h.Sigma0 = v_beta_var * Eigen::MatrixXd::Identity(h.Sigma0.rows(), h.Sigma0.cols());
    if (set(iw_df)) h.nu = v_iw_df;
    if (set(alpha_mean)) h.mu_alpha.setConstant(v_alpha_mean);
    if (set(alpha_var)) h.sigma2_alpha = v_alpha_var;
    if (set(theta_var)) h.Sigma_theta = v_theta_var * Eigen::Matrix2d::Identity();
    if (set(q)) h.q = v_q;
    if (set(r)) h.r = v_r;
    if (set(threshold_shape)) h.alpha_lambda = v_threshold_shape;
    if (set(threshold_rate)) h.beta_lambda = v_threshold_rate;
  }
};

std::string abundance_mean_csv(const std::vector<PosteriorDraws>& chains, const CovariateSeries& cov,
                               const std::vector<std::string>& species) {
  CsvWriter w({"day", "species", "mean"});
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(static_cast<Index>(species.size()), cov.n_days());
  double weight = 0.0;
  for (const auto& c : chains) {
    const auto n = static_cast<double>(c.params_draws.size());
    if (n == 0.0) continue;
    total += n * c.abundance_mean;
    weight += n;
  }
  if (weight > 0.0) total /= weight;
  for (Index i = 0; i < cov.n_days(); ++i)
    for (Index j = 0; j < total.rows(); ++j)
      w.field(cov.day_index[static_cast<std::size_t>(i)])
          .field(species[static_cast<std::size_t>(j)])
          .field(weight > 0.0 ? total(j, i) : std::nan(""))
          .end_row();
  return w.str();
}

int cmd_fit(const FitArgs& a, const PriorOverrides& priors, const std::string& resolved, std::ostream& out,
            std::ostream& err) {
  fs::path obs_path;
  fs::path cov_path;
  std::map<std::string, std::string> data_meta;
  if (!a.data.empty()) {
    if (!a.observations.empty() || !a.covariates.empty())
      throw ConfigError("--data cannot be combined with --observations/--covariates");
    obs_path = fs::path(a.data) / "observations.csv";
    cov_path = fs::path(a.data) / "covariates.csv";
    if (fs::is_regular_file(fs::path(a.data) / "meta.ini")) data_meta = read_key_values(fs::path(a.data) / "meta.ini");
  } else {
    if (a.observations.empty() || a.covariates.empty())
      throw ConfigError("fit needs --data DIR or both --observations and --covariates");
    obs_path = a.observations;
    cov_path = a.covariates;
  }
  require_file(obs_path, "observations file");
  require_file(cov_path, "covariates file");

  McmcConfig config;
  config.n_iterations = a.iterations;
  config.burn_in = a.burn_in;
  config.thin = a.thin;
  config.n_chains = a.chains;
  config.seed = a.seed;
  config.variant = parse_variant(a.variant);
  config.proposal_sd_loglambda = a.proposal_sd;
  config.proposal_sd_lambda_tilde = a.proposal_sd_threshold;
  config.adapt = !a.no_adapt;
  config.truncate_alpha = !a.no_alpha_truncation;
  config.loglambda_stride = a.loglambda_stride;
  config.validate();

  const CovariateSeries cov = load_covariates(cov_path);
  LoadedObservations loaded = load_observations(obs_path, cov);
  const std::uint64_t fp = dataset_fingerprint(obs_path, cov_path);
  ObservationSet obs = a.drop_zero_days ? drop_zero_days(loaded.set) : loaded.set;
  if (a.drop_zero_days)
    out << "dropped " << (loaded.set.n_observed() - obs.n_observed()) << " zero-count days\n";

  Hyperpriors hyper = default_hyperpriors(obs, cov);
  priors.apply(hyper);
  hyper.validate(obs.n_species(), cov.n_covariates());

  const fs::path dir(a.out);
  ensure_directory(dir);
  const std::vector<PosteriorDraws> chains = run_chains(obs, cov, hyper, config);

  double max_rhat = 0.0;
  std::vector<std::string> flagged;
  for (const auto& d : chains.front().diagnostics) {
    if (std::isfinite(d.rhat)) max_rhat = std::max(max_rhat, d.rhat);
    if (std::isfinite(d.rhat) && d.rhat > a.rhat_limit) flagged.push_back(d.name);
  }

  const auto data_mech = data_meta.find("mechanism");
  std::map<std::string, std::string> meta{
      {"variant", to_string(config.variant)},
      {"species", join(loaded.species)},
      {"dataset_fingerprint", hex64(fp)},
      {"drop_zero_days", a.drop_zero_days ? "true" : "false"},
      {"mechanism", data_mech == data_meta.end() ? "unknown" : data_mech->second},
      {"n_chains", std::to_string(config.n_chains)},
      {"n_iterations", std::to_string(config.n_iterations)},
      {"burn_in", std::to_string(config.burn_in)},
      {"thin", std::to_string(config.thin)},
      {"seed", std::to_string(config.seed)},
      {"n_observed", std::to_string(obs.n_observed())},
      {"max_rhat", format_double(max_rhat)},
  };

  write_file_atomic(dir / "draws_params.csv", draws_params_csv(chains, obs.n_species(), cov.n_covariates()));
  write_file_atomic(dir / "draws_loglambda.csv", draws_loglambda_csv(chains, cov, loaded.species));
  write_file_atomic(dir / "abundance_mean.csv", abundance_mean_csv(chains, cov, loaded.species));
  write_file_atomic(dir / "acceptance.csv", acceptance_csv(chains));
  write_file_atomic(dir / "diagnostics.csv", diagnostics_csv(chains.front().diagnostics));
  write_file_atomic(dir / "covariates.csv", covariates_csv(cov));
  write_file_atomic(dir / "observations.csv", observations_csv(obs, cov, loaded.species));
  write_file_atomic(dir / "fit_meta.ini", format_key_values(meta));
  write_file_atomic(dir / "resolved_config.ini", resolved);

  out << to_string(config.variant) << ": chains=" << config.n_chains << " stored=" << config.n_stored()
      << " n=" << obs.n_observed() << " max_rhat=" << format_double(max_rhat) << "\n";
  if (!flagged.empty()) {
    err << "convergence warning: R-hat > " << format_double(a.rhat_limit) << " for " << join(flagged, ' ') << "\n";
    return exit_code::convergence;
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// derive

struct DeriveArgs {
  std::string draws;
  std::string out;
  std::string truth;
  double level = 0.5;
  std::string psi_plugin = "draw";
};

Eigen::MatrixXd load_abundance_mean(const fs::path& path, const CovariateSeries& cov,
                                    const std::vector<std::string>& species) {
  const CsvTable t = read_csv(path);
  const std::size_t dc = t.require_column("day");
  const std::size_t sc = t.require_column("species");
  const std::size_t mc = t.require_column("mean");
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Index>(species.size()), cov.n_days(), std::nan(""));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto pos = cov.position_of(static_cast<int>(t.integer(r, dc)));
    const auto it = std::find(species.begin(), species.end(), t.text(r, sc));
    if (!pos || it == species.end()) throw ValidationError(t.where(r, dc) + ": unknown day or species");
    m(static_cast<Index>(it - species.begin()), *pos) = t.number(r, mc);
  }
  if (!m.allFinite()) throw StateError(path.string() + ": no posterior mean available (zero stored draws?)");
  return m;
}

void cmd_derive(const DeriveArgs& a, std::ostream& out) {
  const fs::path src(a.draws);
  require_file(src / "fit_meta.ini", "fit metadata");
  require_file(src / "draws_params.csv", "draws file");
  const auto meta = read_key_values(src / "fit_meta.ini");
  const std::vector<std::string> species = split(lookup(meta, "species", src / "fit_meta.ini"));
  const CovariateSeries cov = load_covariates(src / "covariates.csv");
  const LoadedObservations obs = load_observations(src / "observations.csv", cov);
  const LoadedDraws draws = load_draws(src, cov, species);
  if (draws.params.empty()) throw StateError("no post-burn-in draws in '" + src.string() + "'");

  std::vector<ModelParams> params;
  std::vector<LatentState> paths;
  for (std::size_t d = 0; d < draws.params.size(); ++d) {
    if (!draws.has_path[d]) continue;
    params.push_back(draws.params[d]);
    paths.push_back(draws.paths[d]);
  }
  if (paths.size() < 2) throw StateError("at least 2 stored latent paths are required in '" + src.string() + "'");
  const auto J = static_cast<Index>(species.size());
  const Index N = cov.n_days();

  // Everything is computed before any file is written.
  const SeriesSummary summary = summarize_series(paths, a.level);
  CsvWriter summary_csv({"day", "species", "median", "lower", "upper", "mean"});
  for (Index i = 0; i < N; ++i)
    for (Index j = 0; j < J; ++j)
      summary_csv.field(cov.day_index[static_cast<std::size_t>(i)])
          .field(species[static_cast<std::size_t>(j)])
          .field(summary.median(j, i))
          .field(summary.lower(j, i))
          .field(summary.upper(j, i))
          .field(summary.mean(j, i))
          .end_row();

  const GrowthSummary growth = summarize_growth(params, paths, cov);
  CsvWriter growth_csv({"day", "species", "median", "mean", "q25", "q75"});
  for (Index i = 1; i < N; ++i)
    for (Index j = 0; j < J; ++j)
      growth_csv.field(cov.day_index[static_cast<std::size_t>(i)])
          .field(species[static_cast<std::size_t>(j)])
          .field(growth.median(j, i))
          .field(growth.mean(j, i))
          .field(growth.q25(j, i))
          .field(growth.q75(j, i))
          .end_row();

  // "median" evaluates every draw's growth rate at the pointwise posterior median path.
  if (a.psi_plugin != "draw" && a.psi_plugin != "median")
    throw ConfigError("--psi-plugin must be 'draw' or 'median'");
  LatentState median_path;
  if (a.psi_plugin == "median") {
    median_path.log_lambda = summary.median.array().log().matrix();
  }
  const auto years = year_windows(cov);
  CsvWriter psi_csv({"year", "species", "draw", "psi"});
  CsvWriter psi_summary_csv({"year", "species", "median", "q25", "q75", "n_without"});
  CsvWriter baseline_csv({"year", "species", "psi"});
  for (const auto& y : years) {
    for (Index j = 0; j < J; ++j) {
      std::vector<double> found;
      Index without = 0;
      for (std::size_t d = 0; d < paths.size(); ++d) {
        const LatentState& plug = a.psi_plugin == "median" ? median_path : paths[d];
        const auto psi = phenometric_psi(params[d], plug, cov, j, y.first, y.last);
        psi_csv.field(y.year).field(species[static_cast<std::size_t>(j)]).field(static_cast<std::int64_t>(d + 1));
        if (psi) {
          const double doy = static_cast<double>(*psi - y.first + 1);
          psi_csv.field(doy);
          found.push_back(doy);
        } else {
          psi_csv.field(std::nan(""));
          ++without;
        }
        psi_csv.end_row();
      }
      std::sort(found.begin(), found.end());
      const bool any = !found.empty();
      psi_summary_csv.field(y.year)
          .field(species[static_cast<std::size_t>(j)])
          .field(any ? quantile_sorted(found, 0.5) : std::nan(""))
          .field(any ? quantile_sorted(found, 0.25) : std::nan(""))
          .field(any ? quantile_sorted(found, 0.75) : std::nan(""))
          .field(static_cast<std::int64_t>(without))
          .end_row();
      const auto base = baseline_psi(obs.set, j, y.first, y.last);
      baseline_csv.field(y.year)
          .field(species[static_cast<std::size_t>(j)])
          .field(base ? static_cast<double>(*base - y.first + 1) : std::nan(""))
          .end_row();
    }
  }

  std::optional<std::string> theta1_text;
  if (draws.variant == ModelVariant::preferential) {
    std::vector<double> theta1;
    for (const auto& p : draws.params) theta1.push_back(p.theta(1));
    std::sort(theta1.begin(), theta1.end());
    CsvWriter w({"lower", "upper", "p_positive"});
    const auto positive = std::count_if(theta1.begin(), theta1.end(), [](double v) { return v > 0.0; });
    w.field(quantile_sorted(theta1, 0.025))
        .field(quantile_sorted(theta1, 0.975))
        .field(static_cast<double>(positive) / static_cast<double>(theta1.size()))
        .end_row();
    theta1_text = w.str();
  }

  std::optional<std::string> rmse_text;
  if (!a.truth.empty()) {
    require_file(a.truth, "truth file");
    const LatentState truth = load_truth(a.truth, cov);
    if (truth.n_species() != J) throw ValidationError("truth file species count does not match the fit");
    const Eigen::MatrixXd estimate = load_abundance_mean(src / "abundance_mean.csv", cov, species);
    const Eigen::MatrixXd actual = truth.log_lambda.array().exp().matrix();
    CsvWriter w({"model_variant", "rmse"});
    w.field(to_string(draws.variant))
        .field(rmse_abundance(std::span<const double>(estimate.data(), static_cast<std::size_t>(estimate.size())),
                              std::span<const double>(actual.data(), static_cast<std::size_t>(actual.size()))))
        .end_row();
    rmse_text = w.str();
  }

  std::map<std::string, std::string> derive_meta{
      {"variant", to_string(draws.variant)},
      {"mechanism", lookup(meta, "mechanism", src / "fit_meta.ini")},
      {"dataset_fingerprint", lookup(meta, "dataset_fingerprint", src / "fit_meta.ini")},
      {"drop_zero_days", lookup(meta, "drop_zero_days", src / "fit_meta.ini")},
      {"species", join(species)},
      {"n_draws", std::to_string(draws.params.size())},
      {"n_paths", std::to_string(paths.size())},
      {"level", format_double(a.level)},
      {"psi_plugin", a.psi_plugin},
  };

  const fs::path dir(a.out);
  ensure_directory(dir);
  write_file_atomic(dir / "summary.csv", summary_csv.str());
  write_file_atomic(dir / "growth.csv", growth_csv.str());
  write_file_atomic(dir / "psi.csv", psi_csv.str());
  write_file_atomic(dir / "psi_summary.csv", psi_summary_csv.str());
  write_file_atomic(dir / "psi_baseline.csv", baseline_csv.str());
  if (theta1_text) write_file_atomic(dir / "theta1.csv", *theta1_text);
  if (rmse_text) write_file_atomic(dir / "rmse.csv", *rmse_text);
  write_file_atomic(dir / "derive_meta.ini", format_key_values(derive_meta));
  out << to_string(draws.variant) << ": draws=" << draws.params.size() << " paths=" << paths.size() << "\n";
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string out;
};

struct CompareRow {
  std::string fingerprint;
  double rmse[2] = {std::nan(""), std::nan("")};  // non_preferential, preferential
  bool seen[2] = {false, false};
  double theta1[3] = {std::nan(""), std::nan(""), std::nan("")};
};

void cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (a.inputs.size() < 2) throw ConfigError("compare needs at least 2 derive directories");
  std::map<std::string, CompareRow> rows;
  for (const auto& in : a.inputs) {
    const fs::path dir(in);
    const fs::path meta_path = dir / "derive_meta.ini";
    require_file(meta_path, "derive metadata");
    const auto meta = read_key_values(meta_path);
    const std::string mech = lookup(meta, "mechanism", meta_path);
    const std::string fp = lookup(meta, "dataset_fingerprint", meta_path);
    const ModelVariant variant = parse_variant(lookup(meta, "variant", meta_path));
    const int slot = variant == ModelVariant::preferential ? 1 : 0;
    auto [it, fresh] = rows.try_emplace(mech);
    CompareRow& row = it->second;
    if (fresh) {
      row.fingerprint = fp;
    } else if (row.fingerprint != fp) {
      throw ValidationError("'" + in + "' was fitted to a different dataset than other '" + mech + "' inputs");
    }
    if (row.seen[slot]) throw ValidationError("duplicate " + to_string(variant) + " input for mechanism '" + mech + "'");
    row.seen[slot] = true;
    if (fs::is_regular_file(dir / "rmse.csv")) {
      const CsvTable t = read_csv(dir / "rmse.csv");
      if (t.rows.size() != 1) throw ValidationError((dir / "rmse.csv").string() + ": expected one row");
      row.rmse[slot] = t.number(0, t.require_column("rmse"));
    }
    if (variant == ModelVariant::preferential && fs::is_regular_file(dir / "theta1.csv")) {
      const CsvTable t = read_csv(dir / "theta1.csv");
      if (t.rows.size() != 1) throw ValidationError((dir / "theta1.csv").string() + ": expected one row");
      row.theta1[0] = t.number(0, t.require_column("lower"));
      row.theta1[1] = t.number(0, t.require_column("upper"));
      row.theta1[2] = t.number(0, t.require_column("p_positive"));
    }
  }

  std::vector<std::string> order;
  for (const char* m : {"random", "preferential_switch", "logistic"})
    if (rows.count(m)) order.emplace_back(m);
  for (const auto& [m, r] : rows)
    if (std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);

  CsvWriter w({"mechanism", "non_preferential_rmse", "preferential_rmse", "theta1_lower", "theta1_upper",
               "theta1_p_positive"});
  for (const auto& m : order) {
    const CompareRow& r = rows.at(m);
    w.field(m).field(r.rmse[0]).field(r.rmse[1]).field(r.theta1[0]).field(r.theta1[1]).field(r.theta1[2]).end_row();
  }
  const fs::path target(a.out);
  if (target.has_parent_path()) ensure_directory(target.parent_path());
  write_file_atomic(target, w.str());
  out << w.str();
}

// ---------------------------------------------------------------------------
// study: simulate -> fit both variants -> derive -> compare

struct StudyArgs {
  std::string out;
  std::uint64_t seed = 1;
  std::string preset = "paper-sim";
  Index iterations = 50000;
  Index burn_in = 20000;
  Index thin = 10;
  Index loglambda_stride = 5;
  bool drop_zero_days = false;
};

int cmd_study(const StudyArgs& a, const std::string& resolved, std::ostream& out, std::ostream& err) {
  const fs::path root(a.out);
  SimulateArgs sim;
  sim.out = (root / "data").string();
  sim.seed = a.seed;
  sim.preset = a.preset;
  cmd_simulate(sim, resolved, out);

  std::vector<fs::path> data_dirs;
  if (a.preset == "paper-sim") {
    for (const auto& m : reference_sampling_mechanisms()) data_dirs.push_back(root / "data" / m.name());
  } else {
    data_dirs.push_back(root / "data");
  }
  int status = exit_code::ok;
  CompareArgs cmp;
  for (const auto& data : data_dirs) {
    const std::string tag = data == root / "data" ? std::string("dataset") : data.filename().string();
    for (const char* variant : {"nonpref", "pref"}) {
      FitArgs fit;
      fit.data = data.string();
      fit.out = (root / "fits" / tag / variant).string();
      fit.variant = variant;
      fit.iterations = a.iterations;
      fit.burn_in = a.burn_in;
      fit.thin = a.thin;
      fit.seed = a.seed;
      fit.loglambda_stride = a.loglambda_stride;
      fit.drop_zero_days = a.drop_zero_days;
      status = std::max(status, cmd_fit(fit, PriorOverrides{}, resolved, out, err));
      DeriveArgs der;
      der.draws = fit.out;
      der.out = (root / "derived" / tag / variant).string();
      der.truth = (data / "truth.csv").string();
      cmd_derive(der, out);
      cmp.inputs.push_back(der.out);
    }
  }
  cmp.out = (root / "comparison.csv").string();
  cmd_compare(cmp, out);
  return status;
}

// ---------------------------------------------------------------------------

// Options of the command that ran, defaults included, in a form --config reads back.
std::string resolved_config_text(const CLI::App& app) {
  for (const CLI::App* sub : app.get_subcommands())
    return "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false);
  return {};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preferential-sampling state-space models for relative abundance counts", "prefsamp"};
  app.set_config("--config", "", "INI file of option values ([command] sections)");
  app.require_subcommand(1, 1);

  CovariatesArgs cov_args;
  auto* cov_cmd = app.add_subcommand("covariates", "Build a design matrix (intercept, GDD, backward box averages)");
  cov_cmd->add_option("--input", cov_args.input, "Environment CSV: day,tmean_c[,date,...]")->required();
  cov_cmd->add_option("--output", cov_args.output, "Covariate CSV to write")->required();
  cov_cmd->add_option("--kernel", cov_args.kernels, "COLUMN=WINDOW (backward box) or COLUMN=raw")
      ->capture_default_str();
  cov_cmd->add_option("--gdd-base", cov_args.gdd_base, "GDD base temperature (C)")->capture_default_str();
  cov_cmd->add_option("--gdd-cutoff", cov_args.gdd_cutoff, "GDD upper cutoff (C)")->capture_default_str();

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate latent abundance, counts and a sampling mechanism");
  sim_cmd->add_option("--out", sim_args.out, "Output directory")->required();
  sim_cmd->add_option("--seed", sim_args.seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--preset", sim_args.preset, "paper-sim or mosquito (fixes process and mechanism settings)");
  sim_cmd->add_option("--covariates", sim_args.covariates, "Covariate CSV (day,intercept,...)");
  sim_cmd->add_option("--temperature", sim_args.temperature, "Environment CSV (day,tmean_c[,date])");
  sim_cmd->add_option("--kernel", sim_args.kernels, "Kernels applied to --temperature or the synthetic series")
      ->capture_default_str();
  sim_cmd->add_option("--first-year", sim_args.first_year, "First year of the synthetic temperature series")
      ->capture_default_str();
  sim_cmd->add_option("--years", sim_args.n_years, "Years of synthetic temperature")->capture_default_str();
  sim_cmd->add_option("--climate-seed", sim_args.climate_seed, "Seed of the synthetic temperature series")
      ->capture_default_str();
  sim_cmd->add_option("--mechanism", sim_args.mechanism, "random, preferential_switch or logistic")
                     ->capture_default_str();
  sim_cmd->add_option("--prob", sim_args.prob, "Sampling probability")->capture_default_str();
  sim_cmd->add_option("--threshold", sim_args.threshold, "Switch threshold on total abundance")
                    ->capture_default_str();
  sim_cmd->add_option("--logit-intercept", sim_args.logit_intercept, "Logistic intercept")
                   ->capture_default_str();
  sim_cmd->add_option("--logit-slope", sim_args.logit_slope, "Logistic slope")->capture_default_str();
  sim_cmd->add_option("--alpha", sim_args.alpha, "Density dependence (1 or J values)")
                      ->delimiter(',')
                      ->capture_default_str();
  sim_cmd->add_option("--beta", sim_args.beta, "Trend coefficients (p or J*p values)")
                     ->delimiter(',')
                     ->capture_default_str();
  sim_cmd->add_option("--sigma2", sim_args.sigma2, "Process variance")->capture_default_str();
  sim_cmd->add_option("--species", sim_args.species, "Number of species")->capture_default_str();
  sim_cmd->add_option("--effort", sim_args.effort, "Constant sampling effort")->capture_default_str();

  FitArgs fit_args;
  PriorOverrides priors;
  auto* fit_cmd = app.add_subcommand("fit", "Run the Gibbs sampler");
  fit_cmd->add_option("--data", fit_args.data, "Dataset directory (observations.csv, covariates.csv)");
  fit_cmd->add_option("--observations", fit_args.observations, "Observation CSV");
  fit_cmd->add_option("--covariates", fit_args.covariates, "Covariate CSV");
  fit_cmd->add_option("--out", fit_args.out, "Output directory")->required();
  fit_cmd->add_option("--variant", fit_args.variant, "pref or nonpref")->capture_default_str();
  fit_cmd->add_option("--iterations", fit_args.iterations, "Total sweeps")->capture_default_str();
  fit_cmd->add_option("--burn-in", fit_args.burn_in, "Burn-in sweeps")->capture_default_str();
  fit_cmd->add_option("--thin", fit_args.thin, "Thinning interval")->capture_default_str();
  fit_cmd->add_option("--chains", fit_args.chains, "Number of chains")->capture_default_str();
  fit_cmd->add_option("--seed", fit_args.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--proposal-sd", fit_args.proposal_sd, "Initial log-abundance proposal sd")
      ->capture_default_str();
  fit_cmd->add_option("--proposal-sd-threshold", fit_args.proposal_sd_threshold, "Threshold proposal sd (log scale)")
      ->capture_default_str();
  fit_cmd->add_flag("--no-adapt", fit_args.no_adapt, "Disable burn-in proposal adaptation");
  fit_cmd->add_flag("--no-alpha-truncation", fit_args.no_alpha_truncation, "Allow |alpha| >= 1");
  fit_cmd->add_option("--loglambda-stride", fit_args.loglambda_stride, "Store the latent path of every k-th draw")
      ->capture_default_str();
  fit_cmd->add_flag("--drop-zero-days", fit_args.drop_zero_days, "Remove observed days with zero total count");
  fit_cmd->add_option("--rhat-limit", fit_args.rhat_limit, "Convergence warning threshold")->capture_default_str();
  priors.sigma2_1 = fit_cmd->add_option("--prior-initial-var", priors.v_sigma2_1, "Variance of log lambda(t_1)");
  priors.beta_var = fit_cmd->add_option("--prior-beta-var", priors.v_beta_var, "Prior variance of mu_beta");
  priors.iw_df = fit_cmd->add_option("--prior-iw-df", priors.v_iw_df, "Inverse-Wishart degrees of freedom");
  priors.alpha_mean = fit_cmd->add_option("--prior-alpha-mean", priors.v_alpha_mean, "Prior mean of alpha_j");
  priors.alpha_var = fit_cmd->add_option("--prior-alpha-var", priors.v_alpha_var, "Prior variance of alpha_j");
  priors.theta_var = fit_cmd->add_option("--prior-theta-var", priors.v_theta_var, "Prior variance of theta");
  priors.q = fit_cmd->add_option("--prior-sigma2-shape", priors.v_q, "Inverse-gamma shape on sigma2");
  priors.r = fit_cmd->add_option("--prior-sigma2-rate", priors.v_r, "Inverse-gamma rate on sigma2");
  priors.threshold_shape =
      fit_cmd->add_option("--prior-threshold-shape", priors.v_threshold_shape, "Gamma shape on lambda_tilde");
  priors.threshold_rate =
      fit_cmd->add_option("--prior-threshold-rate", priors.v_threshold_rate, "Gamma rate on lambda_tilde");

  DeriveArgs der_args;
  auto* der_cmd = app.add_subcommand("derive", "Growth rates, phenometric and abundance summaries");
  der_cmd->add_option("--draws", der_args.draws, "Fit output directory")->required();
  der_cmd->add_option("--out", der_args.out, "Output directory")->required();
  der_cmd->add_option("--truth", der_args.truth, "truth.csv from simulate; enables rmse.csv");
  der_cmd->add_option("--level", der_args.level, "Central band of summary.csv (0.5 = IQR)")->capture_default_str();
  der_cmd->add_option("--psi-plugin", der_args.psi_plugin, "Latent path used for psi: draw or median")
      ->capture_default_str();

  CompareArgs cmp_args;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate RMSE and theta1 across mechanisms and variants");
  cmp_cmd->add_option("inputs", cmp_args.inputs, "Derive output directories")->required();
  cmp_cmd->add_option("--out", cmp_args.out, "Comparison CSV")->required();

  StudyArgs study_args;
  auto* study_cmd = app.add_subcommand("study", "simulate, fit both variants, derive and compare in one run");
  study_cmd->add_option("--out", study_args.out, "Output directory")->required();
  study_cmd->add_option("--seed", study_args.seed, "Random seed")->capture_default_str();
  study_cmd->add_option("--preset", study_args.preset, "paper-sim or mosquito")->capture_default_str();
  study_cmd->add_option("--iterations", study_args.iterations, "Total sweeps per fit")->capture_default_str();
  study_cmd->add_option("--burn-in", study_args.burn_in, "Burn-in sweeps")->capture_default_str();
  study_cmd->add_option("--thin", study_args.thin, "Thinning interval")->capture_default_str();
  study_cmd->add_option("--loglambda-stride", study_args.loglambda_stride, "Latent path storage stride")
      ->capture_default_str();
  study_cmd->add_flag("--drop-zero-days", study_args.drop_zero_days, "Remove zero-count days before fitting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::validation;
  }

  try {
    const std::string resolved = resolved_config_text(app);
    if (*cov_cmd) {
      cmd_covariates(cov_args, out);
    } else if (*sim_cmd) {
      cmd_simulate(sim_args, resolved, out);
    } else if (*fit_cmd) {
      return cmd_fit(fit_args, priors, resolved, out, err);
    } else if (*der_cmd) {
      cmd_derive(der_args, out);
    } else if (*cmp_cmd) {
      cmd_compare(cmp_args, out);
    } else if (*study_cmd) {
      return cmd_study(study_args, resolved, out, err);
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return exit_code::numerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::validation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::validation;
  }
  return exit_code::ok;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"prefsamp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace prefsamp
