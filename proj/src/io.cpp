#include "prefsamp/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "prefsamp/csv.hpp"
#include "prefsamp/errors.hpp"

namespace prefsamp {

RawEnvironmentSeries load_environment(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t day_col = t.require_column("day");
  t.require_column("tmean_c");
  const auto date_col = t.find_column("date");
  RawEnvironmentSeries raw;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == day_col || (date_col && c == *date_col)) continue;
    raw.column_names.push_back(t.header[c]);
    raw.columns.emplace_back();
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    raw.day_index.push_back(static_cast<int>(t.integer(r, day_col)));
    if (date_col) raw.dates.push_back(t.text(r, *date_col));
    std::size_t k = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c == day_col || (date_col && c == *date_col)) continue;
      raw.columns[k++].push_back(t.number(r, c));
    }
  }
  if (raw.day_index.size() < 2) throw ValidationError(path.string() + ": at least 2 days are required");
  raw.validate();
  return raw;
}

std::string environment_csv(const RawEnvironmentSeries& raw) {
  std::vector<std::string> header{"day"};
  if (!raw.dates.empty()) header.emplace_back("date");
  header.insert(header.end(), raw.column_names.begin(), raw.column_names.end());
  CsvWriter w(header);
  for (std::size_t i = 0; i < raw.n_days(); ++i) {
    w.field(raw.day_index[i]);
    if (!raw.dates.empty()) w.field(raw.dates[i]);
    for (const auto& col : raw.columns) w.field(col[i]);
    w.end_row();
  }
  return w.str();
}

CovariateSeries load_covariates(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t day_col = t.require_column("day");
  const std::size_t icpt = t.require_column("intercept");
  if (day_col != 0 || icpt != 1) throw ValidationError(path.string() + ": header must begin with day,intercept");
  const auto date_col = t.find_column("date");
  std::vector<std::size_t> cols;
  CovariateSeries cov;
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    if (date_col && c == *date_col) continue;
    cols.push_back(c);
    cov.names.push_back(t.header[c]);
  }
  const auto n = static_cast<Index>(t.rows.size());
  cov.values.resize(n, static_cast<Index>(cols.size()));
  for (Index r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    cov.day_index.push_back(static_cast<int>(t.integer(row, day_col)));
    if (date_col) cov.dates.push_back(t.text(row, *date_col));
    for (std::size_t k = 0; k < cols.size(); ++k) cov.values(r, static_cast<Index>(k)) = t.number(row, cols[k]);
  }
  cov.warmup.assign(static_cast<std::size_t>(n), false);
  try {
    cov.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return cov;
}

std::string covariates_csv(const CovariateSeries& covariates) {
  std::vector<std::string> header{"day"};
  header.insert(header.end(), covariates.names.begin(), covariates.names.end());
  if (!covariates.dates.empty()) header.emplace_back("date");
  CsvWriter w(header);
  for (Index i = 0; i < covariates.n_days(); ++i) {
    w.field(covariates.day_index[static_cast<std::size_t>(i)]);
    for (Index c = 0; c < covariates.n_covariates(); ++c) w.field(covariates.values(i, c));
    if (!covariates.dates.empty()) w.field(covariates.dates[static_cast<std::size_t>(i)]);
    w.end_row();
  }
  return w.str();
}

std::vector<std::string> default_species_labels(Index n_species) {
  std::vector<std::string> out;
  for (Index j = 0; j < n_species; ++j) out.push_back(std::to_string(j + 1));
  return out;
}

LoadedObservations load_observations(const std::filesystem::path& path, const CovariateSeries& covariates) {
  const CsvTable t = read_csv(path);
  const std::size_t day_col = t.require_column("day");
  const std::size_t species_col = t.require_column("species");
  const std::size_t count_col = t.require_column("count");
  const auto effort_col = t.find_column("effort");
  const auto frac_col = t.find_column("trap_fraction");
  const auto dur_col = t.find_column("duration_days");
  if (frac_col.has_value() != dur_col.has_value())
    throw ValidationError(path.string() + ": trap_fraction and duration_days must appear together");

  struct DayRecord {
    std::map<std::size_t, std::int64_t> counts;  // species index -> count
    double effort = 1.0;
    double fraction = 0.0;
    double duration = 0.0;
    std::size_t first_row = 0;
  };
  LoadedObservations out;
  std::map<std::string, std::size_t> species_index;
  std::map<Index, DayRecord> days;  // study position -> record

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto day = t.integer(r, day_col);
    const auto pos = covariates.position_of(static_cast<int>(day));
    if (!pos) throw ValidationError(t.where(r, day_col) + ": day " + std::to_string(day) + " is outside the covariate range");
    const std::string& label = t.text(r, species_col);
    if (label.empty()) throw ValidationError(t.where(r, species_col) + ": empty species label");
    auto [sit, inserted] = species_index.try_emplace(label, out.species.size());
    if (inserted) out.species.push_back(label);
    const auto count = t.integer(r, count_col);
    if (count < 0) throw ValidationError(t.where(r, count_col) + ": negative count");

    double effort = 1.0;
    double fraction = 0.0;
    double duration = 0.0;
    if (frac_col) {
      fraction = t.number(r, *frac_col);
      duration = t.number(r, *dur_col);
      if (!(fraction > 0.0) || !(duration > 0.0))
        throw ValidationError(t.where(r, *frac_col) + ": trap_fraction and duration_days must be positive");
      effort = fraction * duration;
      if (effort_col && std::abs(t.number(r, *effort_col) - effort) > 1e-12)
        throw ValidationError(t.where(r, *effort_col) + ": effort differs from trap_fraction * duration_days");
    } else if (effort_col) {
      effort = t.number(r, *effort_col);
    }
    if (!(effort > 0.0)) throw ValidationError(t.where(r, effort_col ? *effort_col : count_col) + ": effort must be positive");

    auto [dit, fresh] = days.try_emplace(*pos);
    DayRecord& rec = dit->second;
    if (fresh) {
      rec.effort = effort;
      rec.fraction = fraction;
      rec.duration = duration;
      rec.first_row = r;
    } else if (rec.effort != effort) {
      throw ValidationError(t.where(r, day_col) + ": day " + std::to_string(day) + " has inconsistent effort across species");
    }
    if (!rec.counts.emplace(sit->second, count).second)
      throw ValidationError(t.where(r, day_col) + ": duplicate row for day " + std::to_string(day) + ", species " + label);
  }

  const Index J = static_cast<Index>(out.species.size());
  const Index N = covariates.n_days();
  const Index n = static_cast<Index>(days.size());
  if (J == 0) throw ValidationError(path.string() + ": no observation rows");
  ObservationSet& obs = out.set;
  obs.tau.assign(static_cast<std::size_t>(N), 0);
  obs.counts.resize(J, n);
  obs.effort.resize(n);
  if (frac_col) {
    obs.trap_fraction = Eigen::VectorXd(n);
    obs.duration_days = Eigen::VectorXd(n);
  }
  Index k = 0;
  for (const auto& [pos, rec] : days) {
    if (static_cast<Index>(rec.counts.size()) != J) {
      for (std::size_t s = 0; s < out.species.size(); ++s) {
        if (!rec.counts.count(s))
          throw ValidationError(path.string() + ": day " + std::to_string(covariates.day_index[static_cast<std::size_t>(pos)]) +
                                " has no row for species " + out.species[s]);
      }
    }
    obs.tau[static_cast<std::size_t>(pos)] = 1;
    obs.observed_days.push_back(pos);
    for (const auto& [s, c] : rec.counts) obs.counts(static_cast<Index>(s), k) = c;
    obs.effort(k) = rec.effort;
    if (frac_col) {
      (*obs.trap_fraction)(k) = rec.fraction;
      (*obs.duration_days)(k) = rec.duration;
    }
    ++k;
  }
  obs.validate();
  return out;
}

std::string observations_csv(const ObservationSet& obs, const CovariateSeries& covariates,
                             const std::vector<std::string>& species) {
  if (static_cast<Index>(species.size()) != obs.n_species()) throw ShapeError("observations_csv: species labels");
  const bool split_effort = obs.trap_fraction.has_value() && obs.duration_days.has_value();
  std::vector<std::string> header{"day", "species", "count", "effort"};
  if (split_effort) {
    header.emplace_back("trap_fraction");
    header.emplace_back("duration_days");
  }
  CsvWriter w(header);
  for (Index k = 0; k < obs.n_observed(); ++k) {
    for (Index j = 0; j < obs.n_species(); ++j) {
      w.field(covariates.day_index[static_cast<std::size_t>(obs.observed_days[k])])
          .field(species[static_cast<std::size_t>(j)])
          .field(obs.counts(j, k))
          .field(obs.effort(k));
      if (split_effort) w.field((*obs.trap_fraction)(k)).field((*obs.duration_days)(k));
      w.end_row();
    }
  }
  return w.str();
}

ObservationSet drop_zero_days(const ObservationSet& obs) {
  ObservationSet out;
  out.tau = obs.tau;
  std::vector<Index> keep;
  for (Index k = 0; k < obs.n_observed(); ++k) {
    if (obs.counts.col(k).sum() > 0) {
      keep.push_back(k);
    } else {
      out.tau[static_cast<std::size_t>(obs.observed_days[k])] = 0;
    }
  }
  const auto n = static_cast<Index>(keep.size());
  out.counts.resize(obs.n_species(), n);
  out.effort.resize(n);
  if (obs.trap_fraction) out.trap_fraction = Eigen::VectorXd(n);
  if (obs.duration_days) out.duration_days = Eigen::VectorXd(n);
  for (Index m = 0; m < n; ++m) {
    const Index k = keep[static_cast<std::size_t>(m)];
    out.observed_days.push_back(obs.observed_days[k]);
    out.counts.col(m) = obs.counts.col(k);
    out.effort(m) = obs.effort(k);
    if (obs.trap_fraction) (*out.trap_fraction)(m) = (*obs.trap_fraction)(k);
    if (obs.duration_days) (*out.duration_days)(m) = (*obs.duration_days)(k);
  }
  return out;
}

std::string truth_csv(const LatentState& state, const CovariateSeries& covariates) {
  std::vector<std::string> header{"day"};
  for (Index j = 0; j < state.n_species(); ++j) header.push_back("log_lambda_" + std::to_string(j + 1));
  CsvWriter w(header);
  for (Index i = 0; i < state.n_days(); ++i) {
    w.field(covariates.day_index[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < state.n_species(); ++j) w.field(state.log_lambda(j, i));
    w.end_row();
  }
  return w.str();
}

LatentState load_truth(const std::filesystem::path& path, const CovariateSeries& covariates) {
  const CsvTable t = read_csv(path);
  const std::size_t day_col = t.require_column("day");
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c].rfind("log_lambda_", 0) == 0) cols.push_back(c);
  if (cols.empty()) throw ValidationError(path.string() + ": no log_lambda_<j> columns");
  if (static_cast<Index>(t.rows.size()) != covariates.n_days())
    throw ValidationError(path.string() + ": truth must have one row per covariate day");
  LatentState s;
  s.log_lambda.resize(static_cast<Index>(cols.size()), covariates.n_days());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.integer(r, day_col) != covariates.day_index[r])
      throw ValidationError(t.where(r, day_col) + ": truth days do not match covariate days");
    for (std::size_t j = 0; j < cols.size(); ++j)
      s.log_lambda(static_cast<Index>(j), static_cast<Index>(r)) = t.number(r, cols[j]);
  }
  return s;
}

std::string counts_full_csv(const CountMatrix& counts, const CovariateSeries& covariates) {
  std::vector<std::string> header{"day"};
  for (Index j = 0; j < counts.rows(); ++j) header.push_back("count_" + std::to_string(j + 1));
  CsvWriter w(header);
  for (Index i = 0; i < counts.cols(); ++i) {
    w.field(covariates.day_index[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < counts.rows(); ++j) w.field(counts(j, i));
    w.end_row();
  }
  return w.str();
}

std::string tau_csv(const ObservationSet& obs, const CovariateSeries& covariates) {
  CsvWriter w({"day", "tau"});
  for (std::size_t i = 0; i < obs.tau.size(); ++i)
    w.field(covariates.day_index[i]).field(static_cast<int>(obs.tau[i])).end_row();
  return w.str();
}

std::string draws_params_csv(const std::vector<PosteriorDraws>& chains, Index n_species, Index n_covariates) {
  const ModelVariant variant = chains.empty() ? ModelVariant::preferential : chains.front().variant;
  std::vector<std::string> header{"iter", "chain"};
  const auto names = parameter_names(variant, n_species, n_covariates);
  header.insert(header.end(), names.begin(), names.end());
  CsvWriter w(header);
  for (const auto& c : chains) {
    for (std::size_t d = 0; d < c.params_draws.size(); ++d) {
      w.field(static_cast<std::int64_t>(c.iterations[d])).field(static_cast<std::int64_t>(c.chain + 1));
      for (double v : flatten_parameters(c.params_draws[d], variant)) w.field(v);
      w.end_row();
    }
  }
  return w.str();
}

std::string draws_loglambda_csv(const std::vector<PosteriorDraws>& chains, const CovariateSeries& covariates,
                                const std::vector<std::string>& species) {
  CsvWriter w({"iter", "chain", "day", "species", "value"});
  for (const auto& c : chains) {
    for (std::size_t d = 0; d < c.loglambda_draws.size(); ++d) {
      const auto& L = c.loglambda_draws[d].log_lambda;
      for (Index i = 0; i < L.cols(); ++i)
        for (Index j = 0; j < L.rows(); ++j)
          w.field(static_cast<std::int64_t>(c.loglambda_iterations[d]))
              .field(static_cast<std::int64_t>(c.chain + 1))
              .field(covariates.day_index[static_cast<std::size_t>(i)])
              .field(species[static_cast<std::size_t>(j)])
              .field(L(j, i))
              .end_row();
    }
  }
  return w.str();
}

std::string acceptance_csv(const std::vector<PosteriorDraws>& chains) {
  CsvWriter w({"chain", "block", "rate"});
  for (const auto& c : chains)
    for (const auto& [block, rate] : c.acceptance_rates)
      w.field(static_cast<std::int64_t>(c.chain + 1)).field(block).field(rate).end_row();
  return w.str();
}

std::string diagnostics_csv(const std::vector<ParameterDiagnostic>& diagnostics) {
  CsvWriter w({"param", "ess", "rhat"});
  for (const auto& d : diagnostics) w.field(d.name).field(d.ess).field(d.rhat).end_row();
  return w.str();
}

LoadedDraws load_draws(const std::filesystem::path& dir, const CovariateSeries& covariates,
                       const std::vector<std::string>& species) {
  const CsvTable pt = read_csv(dir / "draws_params.csv");
  LoadedDraws out;
  out.variant = pt.find_column("theta0") ? ModelVariant::preferential : ModelVariant::non_preferential;
  const auto J = static_cast<Index>(species.size());
  const Index p = covariates.n_covariates();
  const std::size_t iter_col = pt.require_column("iter");
  const std::size_t chain_col = pt.require_column("chain");
  const auto names = parameter_names(out.variant, J, p);
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(pt.require_column(n));

  std::map<std::pair<Index, Index>, std::size_t> lookup;
  for (std::size_t r = 0; r < pt.rows.size(); ++r) {
    ModelParams m;
    m.alpha.resize(J);
    m.beta.resize(J, p);
    std::size_t q = 0;
    for (Index j = 0; j < J; ++j) m.alpha(j) = pt.number(r, cols[q++]);
    for (Index j = 0; j < J; ++j)
      for (Index l = 0; l < p; ++l) m.beta(j, l) = pt.number(r, cols[q++]);
    m.sigma2 = pt.number(r, cols[q++]);
    if (out.variant == ModelVariant::preferential) {
      m.theta(0) = pt.number(r, cols[q++]);
      m.theta(1) = pt.number(r, cols[q++]);
      m.lambda_tilde = pt.number(r, cols[q++]);
    }
    const Index chain = pt.integer(r, chain_col);
    const Index iter = pt.integer(r, iter_col);
    lookup[{chain, iter}] = out.params.size();
    out.chain.push_back(chain);
    out.iteration.push_back(iter);
    out.params.push_back(std::move(m));
  }
  out.paths.resize(out.params.size());
  out.has_path.assign(out.params.size(), false);

  const std::filesystem::path ll_path = dir / "draws_loglambda.csv";
  if (!std::filesystem::exists(ll_path)) return out;
  const CsvTable lt = read_csv(ll_path);
  const std::size_t li = lt.require_column("iter");
  const std::size_t lc = lt.require_column("chain");
  const std::size_t ld = lt.require_column("day");
  const std::size_t ls = lt.require_column("species");
  const std::size_t lv = lt.require_column("value");
  std::map<std::string, Index> species_index;
  for (Index j = 0; j < J; ++j) species_index[species[static_cast<std::size_t>(j)]] = j;
  std::vector<Index> filled(out.params.size(), 0);
  for (std::size_t r = 0; r < lt.rows.size(); ++r) {
    const auto key = std::make_pair<Index, Index>(lt.integer(r, lc), lt.integer(r, li));
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw ValidationError(lt.where(r, li) + ": latent draw has no matching parameter draw");
    const std::size_t d = it->second;
    if (!out.has_path[d]) {
      out.paths[d].log_lambda = Eigen::MatrixXd::Constant(J, covariates.n_days(), std::nan(""));
      out.has_path[d] = true;
    }
    const auto pos = covariates.position_of(static_cast<int>(lt.integer(r, ld)));
    if (!pos) throw ValidationError(lt.where(r, ld) + ": day outside the covariate range");
    const auto sp = species_index.find(lt.text(r, ls));
    if (sp == species_index.end()) throw ValidationError(lt.where(r, ls) + ": unknown species");
    out.paths[d].log_lambda(sp->second, *pos) = lt.number(r, lv);
    ++filled[d];
  }
  for (std::size_t d = 0; d < out.params.size(); ++d)
    if (out.has_path[d] && filled[d] != J * covariates.n_days())
      throw ValidationError(ll_path.string() + ": incomplete latent path for iteration " + std::to_string(out.iteration[d]));
  return out;
}

}  // namespace prefsamp
