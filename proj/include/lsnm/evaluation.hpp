#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lsnm/dataset.hpp"

namespace lsnm {

struct AccuracyMetrics {
  double bias = 0.0;
  double mse = 0.0;
  double map_mse = 0.0;
};

/// Bias and MSE of mu_hat - mu_true over observations; Map-MSE over the n x R map.
AccuracyMetrics accuracy_metrics(const Vector& mu_hat, const Vector& mu_true, const Matrix& u_hat,
                                 const Matrix& u_true);

struct CalibrationMetrics {
  double z_mean = 0.0;
  double z_var = 0.0;  // unbiased
  double tail_prob = 0.0;
};

/// Throws TooFewScores with fewer than two scores.
CalibrationMetrics calibration_metrics(const Vector& z, double threshold = 1.96);

struct DetectionMetrics {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;  // NaN when nothing is flagged
  double auc = 0.0;
};

/// Confusion counts at |score| > threshold and the rank AUC of |score|.
/// Throws DegenerateLabels unless both classes are present.
DetectionMetrics detection_metrics(const Vector& scores, const std::vector<int>& labels, double threshold = 1.96);

/// Mann-Whitney AUC with average ranks for ties.
double rank_auc(const Vector& scores, const std::vector<int>& labels);

/// Residual summaries of y - mu_hat.
struct ResidualMetrics {
  double residual_sd = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};
ResidualMetrics residual_metrics(const Vector& y, const Vector& mu_hat);

/// Mean standardized log loss relative to N(mean(y), var(y)).
double msll(const Vector& y, const Vector& mu_hat, const Vector& v_hat);

struct RegionTailRow {
  std::string region;
  int n = 0;
  double mean_z = 0.0;
  double sd_z = 0.0;
  double tail_prob = 0.0;
};

/// Per-region z summaries over observations with include[k] set (all if empty).
std::vector<RegionTailRow> region_tail_table(const LongDataset& data, const Vector& z,
                                             const std::vector<char>& include = {}, double threshold = 1.96);
void write_region_tail_csv(const std::string& path, const std::vector<RegionTailRow>& rows);

/// All metrics of one fitted model on one replicate, as ordered (name, value) pairs.
struct MetricReport {
  std::vector<std::pair<std::string, double>> values;

  void set(const std::string& name, double value);
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
};

struct MetricSummary {
  double mean = 0.0;
  double se = 0.0;  // sd / sqrt(M)
  int n = 0;
};

/// Per-metric Monte Carlo mean and standard error over replicates, ignoring
/// non-finite entries. Order-independent up to floating-point summation.
std::map<std::string, MetricSummary> monte_carlo_summary(const std::vector<MetricReport>& reports);

}  // namespace lsnm
