#include "lsnm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "lsnm/csv.hpp"

namespace lsnm {

AccuracyMetrics accuracy_metrics(const Vector& mu_hat, const Vector& mu_true, const Matrix& u_hat,
                                 const Matrix& u_true) {
  if (mu_hat.size() != mu_true.size()) throw AlignmentError("fitted and true means differ in length");
  if (u_hat.rows() != u_true.rows() || u_hat.cols() != u_true.cols())
    throw AlignmentError("estimated and true deviation maps differ in shape");
  AccuracyMetrics m;
  if (mu_hat.size() > 0) {
    const Vector d = mu_hat - mu_true;
    m.bias = d.mean();
    m.mse = d.squaredNorm() / static_cast<double>(d.size());
  }
  if (u_hat.size() > 0) m.map_mse = (u_hat - u_true).squaredNorm() / static_cast<double>(u_hat.size());
  return m;
}

CalibrationMetrics calibration_metrics(const Vector& z, double threshold) {
  if (z.size() < 2) throw TooFewScores("calibration needs at least 2 scores, got " + std::to_string(z.size()));
  CalibrationMetrics c;
  c.z_mean = z.mean();
  c.z_var = (z.array() - c.z_mean).square().sum() / static_cast<double>(z.size() - 1);
  c.tail_prob = static_cast<double>((z.array().abs() > threshold).count()) / static_cast<double>(z.size());
  return c;
}

double rank_auc(const Vector& scores, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(scores.size());
  if (labels.size() != n) throw AlignmentError("scores and labels differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) {
        rank_sum += avg;
        ++n_pos;
      }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateLabels("AUC needs both positive and negative labels");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

DetectionMetrics detection_metrics(const Vector& scores, const std::vector<int>& labels, double threshold) {
  if (labels.size() != static_cast<std::size_t>(scores.size()))
    throw AlignmentError("scores and labels differ in length");
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const bool flagged = std::abs(scores[static_cast<Index>(k)]) > threshold;
    if (labels[k]) (flagged ? tp : fn) += 1.0;
    else (flagged ? fp : tn) += 1.0;
  }
  if (tp + fn == 0.0 || tn + fp == 0.0) throw DegenerateLabels("detection needs both positive and negative labels");
  DetectionMetrics d;
  d.sensitivity = tp / (tp + fn);
  d.specificity = tn / (tn + fp);
  d.ppv = tp + fp > 0.0 ? tp / (tp + fp) : std::numeric_limits<double>::quiet_NaN();
  d.auc = rank_auc(scores.cwiseAbs(), labels);
  return d;
}

ResidualMetrics residual_metrics(const Vector& y, const Vector& mu_hat) {
  if (y.size() != mu_hat.size()) throw AlignmentError("responses and fitted means differ in length");
  ResidualMetrics m;
  if (y.size() == 0) return m;
  const Vector e = y - mu_hat;
  const double n = static_cast<double>(e.size());
  m.mae = e.cwiseAbs().mean();
  m.rmse = std::sqrt(e.squaredNorm() / n);
  m.residual_sd = e.size() > 1 ? std::sqrt((e.array() - e.mean()).square().sum() / (n - 1.0)) : 0.0;
  return m;
}

double msll(const Vector& y, const Vector& mu_hat, const Vector& v_hat) {
  if (y.size() != mu_hat.size() || y.size() != v_hat.size()) throw AlignmentError("msll: length mismatch");
  if (y.size() < 2) throw TooFewScores("msll needs at least 2 observations");
  const double mean = y.mean();
  const double var = std::max((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1), 1e-12);
  double total = 0.0;
  for (Index k = 0; k < y.size(); ++k)
    total += -normal_log_density(y[k], mu_hat[k], v_hat[k]) + normal_log_density(y[k], mean, var);
  return total / static_cast<double>(y.size());
}

std::vector<RegionTailRow> region_tail_table(const LongDataset& data, const Vector& z,
                                             const std::vector<char>& include, double threshold) {
  if (z.size() != data.n_obs()) throw AlignmentError("z-scores do not cover the dataset");
  std::vector<RegionTailRow> rows;
  for (int r = 0; r < data.n_regions(); ++r) {
    std::vector<double> zs;
    for (int k : data.region_obs[r])
      if (include.empty() || include[k]) zs.push_back(z[k]);
    RegionTailRow row;
    row.region = data.region_labels[r];
    row.n = static_cast<int>(zs.size());
    if (!zs.empty()) {
      const Eigen::Map<const Vector> v(zs.data(), static_cast<Index>(zs.size()));
      row.mean_z = v.mean();
      row.sd_z = zs.size() > 1 ? std::sqrt((v.array() - row.mean_z).square().sum() / (zs.size() - 1.0)) : 0.0;
      row.tail_prob = static_cast<double>((v.array().abs() > threshold).count()) / static_cast<double>(zs.size());
    }
    rows.push_back(row);
  }
  return rows;
}

void write_region_tail_csv(const std::string& path, const std::vector<RegionTailRow>& rows) {
  csv::Writer out(path);
  out.row({"region", "n", "mean_z", "sd_z", "tail_prob"});
  for (const auto& r : rows)
    out.row({r.region, std::to_string(r.n), csv::format_double(r.mean_z), csv::format_double(r.sd_z),
             csv::format_double(r.tail_prob)});
}

void MetricReport::set(const std::string& name, double value) {
  for (auto& [k, v] : values)
    if (k == name) {
      v = value;
      return;
    }
  values.emplace_back(name, value);
}

double MetricReport::get(const std::string& name) const {
  for (const auto& [k, v] : values)
    if (k == name) return v;
  throw ConfigInvalid("metric '" + name + "' not recorded");
}

bool MetricReport::has(const std::string& name) const {
  return std::any_of(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
}

std::map<std::string, MetricSummary> monte_carlo_summary(const std::vector<MetricReport>& reports) {
  std::map<std::string, std::vector<double>> pooled;
  for (const auto& r : reports)
    for (const auto& [k, v] : r.values)
      if (std::isfinite(v)) pooled[k].push_back(v);
  std::map<std::string, MetricSummary> out;
  for (auto& [k, v] : pooled) {
    std::sort(v.begin(), v.end());  // fixed summation order
    MetricSummary s;
    s.n = static_cast<int>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / s.n;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = s.n > 1 ? std::sqrt(ss / (s.n - 1)) / std::sqrt(static_cast<double>(s.n))
                   : std::numeric_limits<double>::quiet_NaN();
    out[k] = s;
  }
  return out;
}

}  // namespace lsnm
