#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lsnm/model.hpp"

namespace lsnm {

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_samples = 1000;
  int thin = 1;
  std::uint64_t seed = 20240601;
  double rho_step = 1.0;    // initial RW scale on logit((rho - lo) / (hi - lo))
  double scale_step = 0.2;  // initial RW scale on log sigma, log sigma_b, log tau_u
  bool adapt = true;        // Robbins-Monro step tuning, warmup only
  bool center_u = true;     // translation moves along the b / u / intercept ridges
  bool spatial = true;      // false: u fixed at zero, tau_u and rho not sampled
  bool collapsed = true;    // (sigma_b, tau_u, rho) updated with (b, u) integrated out
  bool parallel_chains = true;

  void check() const;
};

/// MH blocks, in sweep order.
enum class MhBlock { sigma = 0, sigma_b = 1, tau_u = 2, rho = 3 };
inline constexpr int n_mh_blocks = 4;

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  double rhat = 0.0;
  double ess_bulk = 0.0;
};

/// Retained draws of every scalar parameter, per chain.
///
/// Parameter order: sigma, sigma_b, [tau_u, rho,] B[j][r] (column-major over
/// covariates j then regions r), b[i]. Deviation maps are not stored draw by
/// draw; their pooled mean and sd are accumulated during sampling.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<Matrix> chains;  // per chain: kept draws x params
  int n_covariates = 0;
  int n_regions = 0;
  int n_subjects = 0;
  bool spatial = true;
  Matrix u_mean;
  Matrix u_sd;
  std::vector<std::array<double, n_mh_blocks>> acceptance;  // per chain, post-warmup
  std::vector<ParamSummary> summaries;

  int n_chains() const { return static_cast<int>(chains.size()); }
  int n_kept() const { return chains.empty() ? 0 : static_cast<int>(chains.front().rows()); }
  /// Column of `names`, or -1.
  int index_of(const std::string& name) const;
  /// Draws of one parameter as a (kept x chains) matrix.
  Matrix param(const std::string& name) const;
  /// Up to `max_draws` population-level draws, evenly spaced over the pooled
  /// chains (0 keeps all).
  std::vector<GlobalParams> global_draws(std::size_t max_draws = 0) const;
  /// Posterior means of every component, with u from the accumulated maps.
  ModelState posterior_mean() const;
  /// Recompute `summaries` from `chains`.
  void summarize();
};

std::string beta_name(int j, int r);
std::string b_name(int i);

/// Metropolis-within-Gibbs over (B, b, u, sigma, sigma_b, tau_u, rho).
///
/// Plain sweep: B, b, u by exact Gaussian full conditionals; translation moves
/// when center_u is set; random-walk MH on the three log scales; MH on the
/// logit of rho rescaled to its admissible interval.
///
/// Collapsed sweep (default): sigma given (B, b, u); sigma_b, tau_u and rho one
/// at a time against p(. | B, sigma, y) with every (b_i, u_i) integrated out;
/// B from p(B | sigma, sigma_b, tau_u, rho, y), again with (b, u) integrated
/// out; then (b_i, u_i) jointly from their (R+1)-dimensional Gaussian
/// conditional; then the translation moves.
class GibbsSampler {
 public:
  GibbsSampler(const LongDataset& data, const RegionGraph& graph, PriorConfig prior, SamplerConfig config);

  /// Per-region least squares for B, b = u = 0, scales at the residual sd, rho at the midpoint.
  ModelState initial_state() const;

  /// Full conditional of beta_r.
  GaussianMoments<double> beta_conditional(const ModelState& s, int r) const;
  /// Full conditional of b_i (1-d moments).
  GaussianMoments<double> b_conditional(const ModelState& s, int i) const;

  void gibbs_beta(ModelState& s, RandomStream& rng) const;
  void gibbs_b(ModelState& s, RandomStream& rng) const;
  /// One factorization of the posterior precision per distinct count pattern.
  void gibbs_u(ModelState& s, RandomStream& rng) const;
  /// Exact translation moves: (b_i + c, u_i - c 1) per subject; (b + c, beta_0 - c);
  /// (u_{.r} + c, beta_{0r} - c) per region. The last two need an intercept column.
  void shift_moves(ModelState& s, RandomStream& rng) const;

  /// Log target of a scale on the log scale, including half-Cauchy prior and Jacobian.
  double log_scale_target(MhBlock which, double log_value, const ModelState& s) const;
  /// Log target of rho on the logit scale, including Beta prior and Jacobian.
  double log_rho_target(double logit_value, const ModelState& s) const;

  /// Returns acceptance flags for sigma, sigma_b and tau_u.
  std::array<bool, 3> mh_scales(ModelState& s, RandomStream& rng, const std::array<double, 3>& steps) const;
  bool mh_rho(ModelState& s, RandomStream& rng, double step) const;

  /// Per-subject canonical data terms of (b_i, u_i) given (B, sigma): n x (R+1).
  Matrix latent_data_terms(const ModelState& s) const;
  /// log p(y | B, sigma, sigma_b, tau_u, rho) up to terms free of (sigma_b, tau_u, rho).
  double log_collapsed_likelihood(const ModelState& s, const Matrix& terms) const;
  /// MH on sigma_b, tau_u and rho under the collapsed target (priors and Jacobians included).
  std::array<bool, 3> mh_collapsed(ModelState& s, RandomStream& rng, const std::array<double, 3>& steps) const;
  /// Joint draw of every (b_i, u_i) from its Gaussian conditional.
  void gibbs_bu(ModelState& s, RandomStream& rng) const;
  /// Moments of vec(B) (covariates fastest) given the scales and rho, with (b, u) integrated out.
  GaussianMoments<double> beta_marginal_conditional(const ModelState& s) const;
  void gibbs_beta_marginal(ModelState& s, RandomStream& rng) const;

  double rho_to_logit(double rho) const;
  double logit_to_rho(double v) const;

  PosteriorDraws run() const;

 private:
  struct Pattern {
    Vector counts;
    std::vector<int> subjects;
  };

  void run_chain(int chain, Matrix& kept, Matrix& u_sum, Matrix& u_sum2,
                 std::array<double, n_mh_blocks>& acceptance) const;
  void record(const ModelState& s, Matrix& kept, Index row) const;
  Matrix residual_sums(const ModelState& s) const;  // n x R sums of y - x'beta - b
  void beta_marginal_canonical(const ModelState& s, Matrix& a, Vector& h) const;

  const LongDataset& data_;
  const RegionGraph& graph_;
  PriorConfig prior_;
  SamplerConfig config_;
  Interval interval_;
  std::vector<Matrix> region_xtx_;
  std::vector<Vector> region_xty_;
  std::vector<Matrix> cell_x_;  // per subject: p x R sums of x over the subject's observations in region r
  Matrix cell_y_;               // n x R sums of y
  std::vector<Pattern> patterns_;
  std::vector<int> subject_obs_;
  bool intercept_ = false;
  std::vector<std::string> names_;
};

PosteriorDraws run_sampler(const LongDataset& data, const RegionGraph& graph, const PriorConfig& prior,
                           const SamplerConfig& config);

void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
/// Rebuild chains from a `chain,iter,param,value` file written by write_draws_csv.
PosteriorDraws read_draws_csv(const std::string& path);
void write_summary_json(const std::string& path, const PosteriorDraws& draws);

}  // namespace lsnm
