#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lsnm/dataset.hpp"
#include "lsnm/region_graph.hpp"

namespace lsnm {

/// One full parameter configuration (B, b, u, sigma, sigma_b, tau_u, rho).
struct ModelState {
  Matrix B;  // p x R, column r = beta_r
  Vector b;  // n
  Matrix u;  // n x R
  double sigma = 1.0;
  double sigma_b = 1.0;
  double tau_u = 1.0;
  double rho = 0.0;

  static ModelState zeros(int p, int n, int r);
  /// Throws DimensionMismatch / ConfigInvalid unless shapes match and scales are positive.
  void check(const LongDataset& data) const;
};

/// Population-level parameters only; what a posterior draw carries into scoring.
struct GlobalParams {
  Matrix B;
  double sigma = 1.0;
  double sigma_b = 1.0;
  double tau_u = 1.0;
  double rho = 0.0;
};

struct PriorConfig {
  double sigma_beta = 10.0;
  double scale_sigma = 2.5;    // half-Cauchy scale for sigma
  double scale_sigma_b = 2.5;  // ... for sigma_b
  double scale_tau_u = 2.5;    // ... for tau_u
  double rho_a = 1.0;          // Beta(a, b) on (rho - lo) / (hi - lo)
  double rho_b = 1.0;

  void check() const;
};

/// Half-Cauchy(0, scale) log density at x > 0.
double half_cauchy_log_density(double x, double scale);

/// Mean of observation k: x_it' beta_r + b_i + u_ir.
double obs_mean(const LongDataset& data, const ModelState& state, int k);

/// Sum over observations of log N(Y_itr | x_it' beta_r + b_i + u_ir, sigma^2).
double log_likelihood(const LongDataset& data, const ModelState& state);

/// Cov(Y_a, Y_b) for observation indices a and b under the marginal model.
double marginal_covariance(const LongDataset& data, const RegionGraph& graph, const ModelState& state, int obs_a,
                           int obs_b);

/// Posterior of u_i from canonical sufficient statistics: per-region residual
/// sums and observation counts. With complete visits counts = T_i * 1.
GaussianMoments<double> posterior_u(const Matrix& q, double sigma, double tau_u, const Vector& resid_sum,
                                    const Vector& counts);

/// Posterior of u_i for subject i given (B, b_i, sigma, tau_u, rho) from `state`.
GaussianMoments<double> posterior_u(const LongDataset& data, int subject, const RegionGraph& graph,
                                    const ModelState& state);

/// Predictive for a new visit of a subject with posterior (m_i, S_i).
GaussianMoments<double> posterior_predictive(const GaussianMoments<double>& u_posterior, const Matrix& B,
                                             double b_i, double sigma, const Vector& x_new);

enum class ScoreMode { conditional, marginal };
ScoreMode parse_score_mode(const std::string& s);
std::string to_string(ScoreMode m);

struct DeviationReport {
  Vector y;
  Vector mu_hat;
  Vector v_hat;
  Vector z;
  Matrix u_mean;              // n x R posterior mean deviation maps
  Matrix u_sd;                // n x R posterior standard deviations
  std::vector<Matrix> u_cov;  // optional per-subject S_i
  Vector burden;              // per subject A_i^(m)
  std::vector<int> burden_m;  // m used per subject
};

/// Z = (Y - mu_hat) / sqrt(v_hat). Throws NonpositiveVariance.
Vector z_scores(const Vector& y, const Vector& mu_hat, const Vector& v_hat);

/// Mean of the m largest |Z|. Throws MTooLarge unless 1 <= m <= size.
double burden_index(const Vector& subject_z, int m);

/// max(1, ceil(0.1 * L)).
int default_burden_m(int n_scores);

/// Per-subject burden (default m) from per-observation z-scores.
void fill_burden(const LongDataset& data, DeviationReport& report, std::optional<int> m = std::nullopt);

/// Per-observation predictive moments mixed over parameter draws.
///
/// conditional: (b_i, u_i) are conditioned on the subject's other visits
///   (held-out-visit predictive); subjects with a single visit fall back to
///   the marginal form.
/// marginal: b_i and u_i are integrated out,
///   v = sigma^2 + sigma_b^2 + tau_u^2 [Q^{-1}]_rr.
/// Moments combine across draws by the law of total variance.
struct PredictiveMoments {
  Vector mean;
  Vector var;
};
PredictiveMoments spatial_predictive(const LongDataset& data, const RegionGraph& graph,
                                     const std::vector<GlobalParams>& draws, ScoreMode mode);

/// Per-draw predictive means and variances (obs x draws), used by posterior predictive checks.
void spatial_predictive_by_draw(const LongDataset& data, const RegionGraph& graph,
                                const std::vector<GlobalParams>& draws, ScoreMode mode, Matrix& means,
                                Matrix& vars);

/// Posterior mean / sd of u_i for every subject, with (b_i, u_i) conditioned on
/// all of the subject's data and mixed over parameter draws.
void spatial_deviation_maps(const LongDataset& data, const RegionGraph& graph, const std::vector<GlobalParams>& draws,
                            Matrix& u_mean, Matrix& u_sd);

}  // namespace lsnm
