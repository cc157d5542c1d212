#pragma once

#include <string>
#include <vector>

#include "lsnm/model.hpp"

namespace lsnm {

/// Scores of one dataset under one fit: predictive moments, z, burden.
DeviationReport make_deviation_report(const LongDataset& data, const PredictiveMoments& pred);

/// `subject,visit,region,y,mu_hat,v_hat,z`, one row per observation in dataset order.
void write_z_scores_csv(const std::string& path, const LongDataset& data, const DeviationReport& report);
/// Reads the y, mu_hat, v_hat and z columns back, checking row keys against `data`.
DeviationReport read_z_scores_csv(const std::string& path, const LongDataset& data);

/// `subject,m,burden,max_abs_z,prop_extreme`; prop_extreme counts |z| > threshold.
void write_burden_csv(const std::string& path, const LongDataset& data, const DeviationReport& report,
                      double threshold = 1.96);

/// `subject,region,u_mean,u_sd`.
void write_u_summary_csv(const std::string& path, const LongDataset& data, const Matrix& u_mean, const Matrix& u_sd);
void read_u_summary_csv(const std::string& path, const LongDataset& data, Matrix& u_mean, Matrix& u_sd);

/// Reorder the dataset's regions to `labels`. Throws IncompatibleFit unless the label sets agree.
void align_regions(LongDataset& data, const std::vector<std::string>& labels);

}  // namespace lsnm
