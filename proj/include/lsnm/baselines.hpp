#pragma once

#include <string>
#include <vector>

#include "lsnm/model.hpp"

namespace lsnm {

enum class ModelKind { spatial, longitudinal, cross_sectional };
ModelKind parse_model_kind(const std::string& s);
std::string to_string(ModelKind k);

/// Point fit of one of the two benchmark models.
struct BaselineFit {
  ModelKind kind = ModelKind::cross_sectional;
  Matrix B;            // p x R
  double sigma = 0.0;  // residual sd
  double sigma_b = 0.0;
  Vector b;  // BLUPs, longitudinal only
  int iterations = 0;
  bool converged = true;
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_trace;
  std::vector<std::string> covariate_names;
  std::vector<std::string> region_labels;
  std::vector<std::string> subject_ids;
};

inline constexpr double variance_floor = 1e-12;

/// Per-region least squares, pooled residual variance.
BaselineFit fit_cross_sectional(const LongDataset& data);

struct EmOptions {
  int max_iter = 500;
  double tolerance = 1e-8;  // relative change of the log-likelihood
  bool throw_on_nonconvergence = true;
};

/// Random-intercept linear mixed model by EM; b holds the BLUPs at the final estimates.
BaselineFit fit_longitudinal(const LongDataset& data, const EmOptions& options = {});

/// Marginal Gaussian log-likelihood of the random-intercept model.
double random_intercept_log_likelihood(const LongDataset& data, const Matrix& B, double sigma, double sigma_b);

/// Per-observation predictive moments with plug-in estimates.
///   cross-sectional: (x'beta_r, sigma^2) in both modes.
///   longitudinal conditional: b_i conditioned on the subject's other visits.
///   longitudinal marginal: (x'beta_r, sigma^2 + sigma_b^2).
PredictiveMoments baseline_predictive(const LongDataset& data, const BaselineFit& fit, ScoreMode mode);

/// In-sample fitted mean: x'beta_r, plus b_i for the longitudinal model.
Vector baseline_fitted(const LongDataset& data, const BaselineFit& fit);

/// Residual deviation map: per subject and region, mean of y - x'beta_r
/// (minus b_i for the longitudinal model). Cells without data are zero.
Matrix baseline_deviation_map(const LongDataset& data, const BaselineFit& fit);

/// u_hat / (sigma / sqrt(n_ir)); zero where a cell has no data.
Matrix baseline_detection_score(const LongDataset& data, const BaselineFit& fit, const Matrix& u_hat);

void write_baseline_json(const std::string& path, const BaselineFit& fit);
BaselineFit read_baseline_json(const std::string& path);

}  // namespace lsnm
