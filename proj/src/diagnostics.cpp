#include "lsnm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace lsnm {

namespace {

Matrix split_chains(const Matrix& draws) {
  const Index n = draws.rows();
  const Index m = draws.cols();
  const Index h = n / 2;
  Matrix out(h, 2 * m);
  for (Index c = 0; c < m; ++c) {
    out.col(2 * c) = draws.col(c).head(h);
    out.col(2 * c + 1) = draws.col(c).tail(h);
  }
  return out;
}

void check_draws(const Matrix& draws, Index min_chains) {
  if (draws.cols() < min_chains)
    throw TooFewDraws("diagnostic needs at least " + std::to_string(min_chains) + " chains");
  if (draws.rows() < 4) throw TooFewDraws("diagnostic needs at least 4 draws per chain");
}

bool is_constant(const Matrix& draws) {
  return draws.size() == 0 || (draws.array() == draws(0, 0)).all();
}

double rhat_basic(const Matrix& chains) {
  const double n = static_cast<double>(chains.rows());
  const Index m = chains.cols();
  const Vector means = chains.colwise().mean();
  Vector vars(m);
  for (Index c = 0; c < m; ++c) vars[c] = (chains.col(c).array() - means[c]).square().sum() / (n - 1.0);
  const double w = vars.mean();
  const double between = (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  const double var_plus = (n - 1.0) / n * w + between;
  if (w <= 0.0) return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  return std::sqrt(var_plus / w);
}

double ess_basic(const Matrix& chains) {
  const Index n = chains.rows();
  const Index m = chains.cols();
  const double nd = static_cast<double>(n);
  const Matrix centered = chains.rowwise() - chains.colwise().mean();
  const Vector means = chains.colwise().mean();

  auto mean_acov = [&](Index lag) {
    double s = 0.0;
    for (Index c = 0; c < m; ++c)
      s += centered.col(c).head(n - lag).dot(centered.col(c).tail(n - lag)) / nd;
    return s / static_cast<double>(m);
  };

  const double acov0 = mean_acov(0);
  const double mean_var = acov0 * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  if (!(var_plus > 0.0)) return 1.0;

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  Index t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const Index max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n) rho[max_t + 1] = rho_even;

  // Geyer's initial monotone sequence
  t = 1;
  while (t <= max_t - 4) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0;
      rho[t + 2] = rho[t + 1];
    }
    t += 2;
  }
  const double total = nd * static_cast<double>(m);
  double tau = -1.0;
  for (Index k = 0; k <= max_t && k < n; ++k) tau += 2.0 * rho[k];
  if (max_t + 1 < n) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total);
}

}  // namespace

Matrix rank_normalize(const Matrix& draws) {
  const Index s = draws.size();
  std::vector<Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), Index{0});
  const double* data = draws.data();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return data[a] < data[b]; });
  Matrix out(draws.rows(), draws.cols());
  double* dst = out.data();
  const boost::math::normal_distribution<double> std_normal;
  Index i = 0;
  while (i < s) {
    Index j = i;
    while (j + 1 < s && data[order[j + 1]] == data[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double p = (avg_rank - 0.375) / (static_cast<double>(s) + 0.25);
    const double z = boost::math::quantile(std_normal, p);
    for (Index k = i; k <= j; ++k) dst[order[k]] = z;
    i = j + 1;
  }
  return out;
}

double split_rhat(const Matrix& draws) {
  check_draws(draws, 2);
  if (is_constant(draws)) return 1.0;
  return rhat_basic(rank_normalize(split_chains(draws)));
}

double bulk_ess(const Matrix& draws) {
  check_draws(draws, 1);
  if (is_constant(draws)) return 1.0;
  return ess_basic(rank_normalize(split_chains(draws)));
}

double split_rhat_raw(const Matrix& draws) {
  check_draws(draws, 2);
  if (is_constant(draws)) return 1.0;
  return rhat_basic(split_chains(draws));
}

double ess_raw(const Matrix& draws) {
  check_draws(draws, 1);
  if (is_constant(draws)) return 1.0;
  return ess_basic(split_chains(draws));
}

PpcStatistic parse_ppc_statistic(const std::string& s) {
  if (s == "z_hist") return PpcStatistic::z_hist;
  if (s == "qq") return PpcStatistic::qq;
  if (s == "obs_vs_fit") return PpcStatistic::obs_vs_fit;
  throw ConfigInvalid("posterior predictive statistic must be one of {z_hist, qq, obs_vs_fit}, got '" + s + "'");
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> hist_edges() {
  std::vector<double> e{-std::numeric_limits<double>::infinity()};
  for (int k = 0; k <= 16; ++k) e.push_back(-4.0 + 0.5 * k);
  e.push_back(std::numeric_limits<double>::infinity());
  return e;
}

std::vector<double> histogram(const Vector& z, const std::vector<double>& edges) {
  std::vector<double> counts(edges.size() - 1, 0.0);
  for (Index k = 0; k < z.size(); ++k) {
    auto it = std::upper_bound(edges.begin(), edges.end(), z[k]);
    const auto bin = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - edges.begin()) - 1));
    counts[std::min(bin, counts.size() - 1)] += 1.0;
  }
  return counts;
}

}  // namespace

PpcTable posterior_predictive_check(const Vector& y, const Matrix& means, const Matrix& vars, PpcStatistic statistic,
                                    RandomStream& rng) {
  if (means.rows() != y.size() || vars.rows() != y.size() || means.cols() != vars.cols() || means.cols() < 1)
    throw DimensionMismatch("posterior predictive check: inconsistent inputs");
  const Index n = y.size();
  const Index s = means.cols();
  const Vector mu = means.rowwise().mean();
  const Vector second = means.array().square().rowwise().mean();
  const Vector v = vars.rowwise().mean() + (second - mu.cwiseProduct(mu)).cwiseMax(0.0);
  const Vector sd = v.cwiseSqrt();
  const Vector z_obs = (y - mu).cwiseQuotient(sd);

  PpcTable table;
  if (statistic == PpcStatistic::obs_vs_fit) {
    table.columns = {"y", "fitted"};
    for (Index k = 0; k < n; ++k) table.rows.push_back({y[k], mu[k]});
    const double my = y.mean(), mf = mu.mean();
    const double cov = (y.array() - my).matrix().dot((mu.array() - mf).matrix());
    const double vy = (y.array() - my).square().sum(), vf = (mu.array() - mf).square().sum();
    table.summary = (vy > 0.0 && vf > 0.0) ? cov / std::sqrt(vy * vf) : 1.0;
    return table;
  }

  auto replicate_z = [&](Index draw) {
    Vector z(n);
    for (Index k = 0; k < n; ++k) {
      const double y_rep = means(k, draw) + std::sqrt(vars(k, draw)) * rng.gaussian();
      z[k] = (y_rep - mu[k]) / sd[k];
    }
    return z;
  };

  if (statistic == PpcStatistic::z_hist) {
    const auto edges = hist_edges();
    const auto observed = histogram(z_obs, edges);
    std::vector<std::vector<double>> rep(edges.size() - 1);
    for (Index d = 0; d < s; ++d) {
      const auto counts = histogram(replicate_z(d), edges);
      for (std::size_t b = 0; b < counts.size(); ++b) rep[b].push_back(counts[b]);
    }
    table.columns = {"bin_lo", "bin_hi", "observed", "rep_lo", "rep_median", "rep_hi"};
    int inside = 0;
    for (std::size_t b = 0; b < observed.size(); ++b) {
      std::sort(rep[b].begin(), rep[b].end());
      const double lo = quantile_sorted(rep[b], 0.025), med = quantile_sorted(rep[b], 0.5),
                   hi = quantile_sorted(rep[b], 0.975);
      if (observed[b] >= lo && observed[b] <= hi) ++inside;
      table.rows.push_back({edges[b], edges[b + 1], observed[b], lo, med, hi});
    }
    table.summary = static_cast<double>(inside) / static_cast<double>(observed.size());
    return table;
  }

  // qq
  constexpr int n_probs = 99;
  std::vector<double> obs_sorted(z_obs.data(), z_obs.data() + n);
  std::sort(obs_sorted.begin(), obs_sorted.end());
  std::vector<double> rep_q(n_probs, 0.0);
  for (Index d = 0; d < s; ++d) {
    const Vector z = replicate_z(d);
    std::vector<double> sorted(z.data(), z.data() + n);
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < n_probs; ++k) rep_q[k] += quantile_sorted(sorted, (k + 0.5) / n_probs);
  }
  table.columns = {"prob", "observed_quantile", "replicate_quantile"};
  for (int k = 0; k < n_probs; ++k) {
    const double p = (k + 0.5) / n_probs;
    table.rows.push_back({p, quantile_sorted(obs_sorted, p), rep_q[k] / static_cast<double>(s)});
  }
  return table;
}

}  // namespace lsnm
