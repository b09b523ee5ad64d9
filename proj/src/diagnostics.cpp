#include "prefsamp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prefsamp/errors.hpp"

namespace prefsamp {

namespace {

using Chains = std::vector<std::vector<double>>;

std::size_t shortest(const Chains& chains) {
  if (chains.empty()) throw StateError("diagnostics: no chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  return n;
}

Chains split(const Chains& chains) {
  const std::size_t n = shortest(chains);
  const std::size_t half = n / 2;
  Chains out;
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(n - half), c.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

struct Moments {
  std::vector<double> means;
  std::vector<double> variances;
  double within = 0.0;   // W
  double between = 0.0;  // B
  std::size_t n = 0;
};

Moments moments(const Chains& chains) {
  Moments m;
  m.n = shortest(chains);
  const double n = static_cast<double>(m.n);
  for (const auto& c : chains) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) s += c[i];
    const double mu = s / n;
    double v = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) v += (c[i] - mu) * (c[i] - mu);
    m.means.push_back(mu);
    m.variances.push_back(v / (n - 1.0));
  }
  const double k = static_cast<double>(chains.size());
  double grand = 0.0;
  for (double mu : m.means) grand += mu;
  grand /= k;
  for (double mu : m.means) m.between += (mu - grand) * (mu - grand);
  m.between *= n / (k - 1.0);
  for (double v : m.variances) m.within += v;
  m.within /= k;
  return m;
}

}  // namespace

double split_rhat(const Chains& chains) {
  const Chains halves = split(chains);
  if (halves.front().size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const Moments m = moments(halves);
  const double n = static_cast<double>(m.n);
  if (m.within <= 0.0) return m.between <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * m.within + m.between / n;
  return std::sqrt(var_plus / m.within);
}

double effective_sample_size(const Chains& chains) {
  const Chains halves = split(chains);
  const std::size_t n = halves.front().size();
  if (n < 4) return std::numeric_limits<double>::quiet_NaN();
  const Moments m = moments(halves);
  const double nd = static_cast<double>(n);
  const double k = static_cast<double>(halves.size());
  const double var_plus = (nd - 1.0) / nd * m.within + m.between / nd;
  if (!(var_plus > 0.0)) return k * nd;

  // rho_t = 1 - (W - mean autocovariance_t) / var_plus
  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < halves.size(); ++c) {
      const auto& x = halves[c];
      const double mu = m.means[c];
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mu) * (x[i + lag] - mu);
      acov += s / nd;
    }
    acov /= k;
    return 1.0 - (m.within - acov) / var_plus;
  };

  // Geyer: sum consecutive pairs while positive, enforcing monotone decrease.
  double tau = -1.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous_pair);
    previous_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(k * nd));
  return k * nd / tau;
}

}  // namespace prefsamp
