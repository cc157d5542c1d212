#include "lsnm/report.hpp"

#include <algorithm>
#include <cmath>

#include "lsnm/csv.hpp"

namespace lsnm {

DeviationReport make_deviation_report(const LongDataset& data, const PredictiveMoments& pred) {
  DeviationReport r;
  r.y = data.y;
  r.mu_hat = pred.mean;
  r.v_hat = pred.var;
  r.z = z_scores(data.y, pred.mean, pred.var);
  fill_burden(data, r);
  return r;
}

void write_z_scores_csv(const std::string& path, const LongDataset& data, const DeviationReport& report) {
  csv::Writer out(path);
  out.row({"subject", "visit", "region", "y", "mu_hat", "v_hat", "z"});
  for (int k = 0; k < data.n_obs(); ++k) {
    const int v = data.obs_visit[k];
    out.row({data.subject_ids[data.visit_subject[v]], std::to_string(data.visit_number[v]),
             data.region_labels[data.obs_region[k]], csv::format_double(report.y[k]),
             csv::format_double(report.mu_hat[k]), csv::format_double(report.v_hat[k]),
             csv::format_double(report.z[k])});
  }
}

DeviationReport read_z_scores_csv(const std::string& path, const LongDataset& data) {
  const csv::Table t = csv::read(path);
  const int cs = t.require("subject", path), cv = t.require("visit", path), cr = t.require("region", path);
  const int cy = t.require("y", path), cm = t.require("mu_hat", path), cvh = t.require("v_hat", path);
  const int cz = t.require("z", path);
  if (static_cast<int>(t.rows.size()) != data.n_obs())
    throw AlignmentError(path + ": expected " + std::to_string(data.n_obs()) + " rows");
  DeviationReport r;
  r.y.resize(data.n_obs());
  r.mu_hat.resize(data.n_obs());
  r.v_hat.resize(data.n_obs());
  r.z.resize(data.n_obs());
  for (int k = 0; k < data.n_obs(); ++k) {
    const auto& row = t.rows[static_cast<std::size_t>(k)];
    const int v = data.obs_visit[k];
    if (row[cs] != data.subject_ids[data.visit_subject[v]] || row[cv] != std::to_string(data.visit_number[v]) ||
        row[cr] != data.region_labels[data.obs_region[k]])
      throw AlignmentError(path + ": row " + std::to_string(k + 2) + " does not match the dataset");
    r.y[k] = csv::parse_double(row[cy], path);
    r.mu_hat[k] = csv::parse_double(row[cm], path);
    r.v_hat[k] = csv::parse_double(row[cvh], path);
    r.z[k] = csv::parse_double(row[cz], path);
  }
  fill_burden(data, r);
  return r;
}

void write_burden_csv(const std::string& path, const LongDataset& data, const DeviationReport& report,
                      double threshold) {
  csv::Writer out(path);
  out.row({"subject", "m", "burden", "max_abs_z", "prop_extreme"});
  for (int i = 0; i < data.n_subjects(); ++i) {
    double max_abs = 0.0;
    int n = 0, extreme = 0;
    for (int v : data.subject_visits[i])
      for (int k : data.visit_obs[v]) {
        max_abs = std::max(max_abs, std::abs(report.z[k]));
        extreme += std::abs(report.z[k]) > threshold;
        ++n;
      }
    const double nan = std::nan("");
    out.row({data.subject_ids[i], std::to_string(report.burden_m[i]), csv::format_double(report.burden[i]),
             csv::format_double(n ? max_abs : nan), csv::format_double(n ? double(extreme) / n : nan)});
  }
}

void write_u_summary_csv(const std::string& path, const LongDataset& data, const Matrix& u_mean,
                         const Matrix& u_sd) {
  csv::Writer out(path);
  out.row({"subject", "region", "u_mean", "u_sd"});
  for (int i = 0; i < data.n_subjects(); ++i)
    for (int r = 0; r < data.n_regions(); ++r)
      out.row({data.subject_ids[i], data.region_labels[r], csv::format_double(u_mean(i, r)),
               csv::format_double(u_sd(i, r))});
}

void read_u_summary_csv(const std::string& path, const LongDataset& data, Matrix& u_mean, Matrix& u_sd) {
  const csv::Table t = csv::read(path);
  const int cs = t.require("subject", path), cr = t.require("region", path);
  const int cm = t.require("u_mean", path), cd = t.require("u_sd", path);
  if (static_cast<int>(t.rows.size()) != data.n_subjects() * data.n_regions())
    throw AlignmentError(path + ": expected one row per subject and region");
  u_mean.resize(data.n_subjects(), data.n_regions());
  u_sd.resize(data.n_subjects(), data.n_regions());
  std::size_t row = 0;
  for (int i = 0; i < data.n_subjects(); ++i)
    for (int r = 0; r < data.n_regions(); ++r, ++row) {
      const auto& f = t.rows[row];
      if (f[cs] != data.subject_ids[i] || f[cr] != data.region_labels[r])
        throw AlignmentError(path + ": row " + std::to_string(row + 2) + " does not match the dataset");
      u_mean(i, r) = csv::parse_double(f[cm], path);
      u_sd(i, r) = csv::parse_double(f[cd], path);
    }
}

void align_regions(LongDataset& data, const std::vector<std::string>& labels) {
  if (labels == data.region_labels) return;
  std::vector<std::string> a = labels, b = data.region_labels;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) {
    for (const auto& l : data.region_labels)
      if (std::find(labels.begin(), labels.end(), l) == labels.end())
        throw IncompatibleFit("region '" + l + "' is not in the fit");
    throw IncompatibleFit("dataset lacks regions present in the fit");
  }
  std::vector<int> remap(data.region_labels.size());
  for (std::size_t r = 0; r < data.region_labels.size(); ++r)
    remap[r] = static_cast<int>(std::find(labels.begin(), labels.end(), data.region_labels[r]) - labels.begin());
  for (int& r : data.obs_region) r = remap[static_cast<std::size_t>(r)];
  data.region_labels = labels;
  data.build_index();
}

}  // namespace lsnm
