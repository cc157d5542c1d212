#pragma once

#include <string>
#include <vector>

#include "lsnm/linalg.hpp"

namespace lsnm {

/// Rank-normalized split-R-hat.
///
/// `draws` holds one chain per column. Every chain is split in half, the
/// pooled draws are replaced by normal scores of their (average-tie) ranks,
/// z = Phi^{-1}((rank - 3/8) / (S + 1/4)), and the classical potential scale
/// reduction sqrt(var_plus / W) is computed over the 2M half-chains.
/// Constant input returns 1.
double split_rhat(const Matrix& draws);

/// Rank-normalized bulk effective sample size over split chains.
///
/// Autocorrelations are combined across chains as
/// rho_t = 1 - (W - mean_m acov_m(t)) / var_plus and summed with Geyer's
/// initial positive sequence made monotone. The result is capped at the total
/// number of draws; constant input returns 1.
double bulk_ess(const Matrix& draws);

/// Non-normalized variants, exposed for the affine-invariance checks.
double split_rhat_raw(const Matrix& draws);
double ess_raw(const Matrix& draws);

/// Normal scores of average ranks over all entries.
Matrix rank_normalize(const Matrix& draws);

struct ChainDiagnostics {
  std::vector<std::string> names;
  std::vector<double> rhat;
  std::vector<double> ess_bulk;
  std::vector<std::vector<double>> acceptance;  // per chain, per MH block
};

enum class PpcStatistic { z_hist, qq, obs_vs_fit };
PpcStatistic parse_ppc_statistic(const std::string& s);

struct PpcTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  double summary = 0.0;  // z_hist: share of bins inside the envelope; obs_vs_fit: correlation
};

/// Posterior predictive check from per-draw predictive moments (obs x draws).
///
/// For every draw s a replicate y_rep ~ N(means(:, s), vars(:, s)) is
/// simulated and standardized with the same (mu_hat, v_hat) used to score the
/// observed data.
///   z_hist: bins of width 0.5 on [-4, 4] plus two tail bins; observed count
///           against the 2.5% / 50% / 97.5% replicate counts.
///   qq:     probabilities (k - 0.5) / 99, observed z quantile and the mean
///           replicate quantile.
///   obs_vs_fit: one row per observation (y, mu_hat).
PpcTable posterior_predictive_check(const Vector& y, const Matrix& means, const Matrix& vars, PpcStatistic statistic,
                                    RandomStream& rng);

}  // namespace lsnm
