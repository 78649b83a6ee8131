#include "tucker_hurdle/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "tucker_hurdle/errors.hpp"

namespace tucker_hurdle {

namespace {

void require_shape(std::span<const std::vector<double>> chains) {
  if (chains.size() < 2) throw ContractError("diagnostics need at least two chains");
  const std::size_t n = chains[0].size();
  if (n < 4) throw ContractError("diagnostics need at least four draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw ContractError("chains have different lengths");
  }
}

// Halves of every chain; the middle draw of an odd-length chain is dropped.
std::vector<std::vector<double>> split(std::span<const std::vector<double>> chains) {
  std::vector<std::vector<double>> out;
  const std::size_t half = chains[0].size() / 2;
  const std::size_t n = chains[0].size();
  for (const auto& c : chains) {
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(n - half), c.end());
  }
  return out;
}

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Biased autocovariance at lag t (divides by n).
double autocovariance(std::span<const double> x, double m, std::size_t t) {
  double s = 0.0;
  for (std::size_t i = 0; i + t < x.size(); ++i) s += (x[i] - m) * (x[i + t] - m);
  return s / static_cast<double>(x.size());
}

// Multi-chain ESS with Geyer's initial monotone sequence estimator.
double ess_of_chains(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains[0].size();
  std::vector<double> means(m);
  std::vector<double> vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean(chains[c]);
    vars[c] = autocovariance(chains[c], means[c], 0) * static_cast<double>(n) /
              static_cast<double>(n - 1);
  }
  const double mean_var = mean(vars);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) var_plus += sample_variance(means);
  if (!(var_plus > 0.0)) return 0.0;

  auto rho_at = [&](std::size_t t) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov += autocovariance(chains[c], means[c], t);
    acov /= static_cast<double>(m);
    return 1.0 - (mean_var - acov) / var_plus;
  };

  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[1] = rho_odd;
  std::size_t t = 0;
  while (t + 5 < n && rho_even + rho_odd > 0.0 && std::isfinite(rho_even + rho_odd)) {
    t += 2;
    rho_even = rho_at(t);
    rho_odd = rho_at(t + 1);
    if (rho_even + rho_odd >= 0.0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n) rho[max_t + 1] = rho_even;

  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = (rho[k - 1] + rho[k]) / 2.0;
      rho[k + 2] = rho[k + 1];
    }
  }
  const double total = static_cast<double>(m * n);
  double tau = -1.0;
  for (std::size_t k = 0; k <= max_t; ++k) tau += 2.0 * rho[k];
  if (max_t + 1 < n) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) {
      pooled.emplace_back(chains[c][i], c * chains[c].size() + i);
    }
  }
  std::sort(pooled.begin(), pooled.end());
  const double s = static_cast<double>(pooled.size());
  std::vector<double> z(pooled.size());
  const boost::math::normal normal;
  for (std::size_t k = 0; k < pooled.size();) {
    std::size_t j = k;
    while (j < pooled.size() && pooled[j].first == pooled[k].first) ++j;
    // average rank (1-based) across ties
    const double r = (static_cast<double>(k + 1) + static_cast<double>(j)) / 2.0;
    const double v = boost::math::quantile(normal, (r - 0.375) / (s + 0.25));
    for (std::size_t u = k; u < j; ++u) z[pooled[u].second] = v;
    k = j;
  }
  std::vector<std::vector<double>> out = chains;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) out[c][i] = z[c * chains[c].size() + i];
  }
  return out;
}

}  // namespace

double split_rhat(std::span<const std::vector<double>> chains) {
  require_shape(chains);
  const auto halves = split(chains);
  const double n = static_cast<double>(halves[0].size());
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& h : halves) {
    means.push_back(mean(h));
    vars.push_back(sample_variance(h));
  }
  const double w = mean(vars);
  if (!(w > 0.0)) return 0.0;
  const double b_over_n = sample_variance(means);
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double ess_basic(std::span<const std::vector<double>> chains) {
  require_shape(chains);
  return ess_of_chains(split(chains));
}

double ess_bulk(std::span<const std::vector<double>> chains) {
  require_shape(chains);
  const auto halves = split(chains);
  double w = 0.0;
  for (const auto& h : halves) w += sample_variance(h);
  if (!(w > 0.0)) return 0.0;
  return ess_of_chains(rank_normalize(halves));
}

ChainDiagnostics diagnostics(const PosteriorDraws& draws) {
  if (draws.n_chains < 2) throw ContractError("diagnostics need at least two chains");
  if (draws.n_samples < 4) throw ContractError("diagnostics need at least four draws per chain");
  ChainDiagnostics out;
  out.split_rhat.resize(draws.dimension);
  out.ess_bulk.resize(draws.dimension);
  out.zero_variance.resize(draws.dimension);
  for (std::size_t i = 0; i < draws.dimension; ++i) {
    const auto chains = draws.chains(i);
    out.split_rhat[i] = split_rhat(chains);
    out.zero_variance[i] = out.split_rhat[i] == 0.0;
    out.ess_bulk[i] = out.zero_variance[i] ? 0.0 : ess_bulk(chains);
  }
  for (const auto& s : draws.stats) out.n_divergent += s.divergent ? 1 : 0;
  return out;
}

}  // namespace tucker_hurdle
