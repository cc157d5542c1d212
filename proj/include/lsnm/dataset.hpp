#pragma once

#include <string>
#include <vector>

#include "lsnm/linalg.hpp"

namespace lsnm {

/// Long-format observations Y_itr with visit-level covariates X_it.
///
/// Visits are stored once (one row of `X` per subject-visit); observations
/// reference their visit and region. Raw covariate columns are kept as the
/// strings they were read from so that a dataset written back to CSV is
/// byte-identical to its source.
struct LongDataset {
  std::vector<std::string> subject_ids;
  std::vector<std::string> region_labels;
  std::vector<int> reference_flag;  // G_i: 0 reference, 1 non-reference

  // visit level
  std::vector<int> visit_subject;
  std::vector<int> visit_number;  // t, 1-based
  std::vector<std::string> raw_covariate_names;
  std::vector<std::vector<std::string>> raw_covariates;  // per visit, parallel to raw_covariate_names
  std::vector<std::string> covariate_names;              // design columns
  Matrix X;                                              // n_visits x p

  // observation level
  std::vector<int> obs_visit;
  std::vector<int> obs_region;
  Vector y;

  // derived by build_index()
  std::vector<std::vector<int>> subject_visits;
  std::vector<std::vector<int>> visit_obs;
  std::vector<std::vector<int>> region_obs;

  int n_subjects() const { return static_cast<int>(subject_ids.size()); }
  int n_regions() const { return static_cast<int>(region_labels.size()); }
  int n_covariates() const { return static_cast<int>(X.cols()); }
  int n_visits() const { return static_cast<int>(visit_subject.size()); }
  int n_obs() const { return static_cast<int>(obs_visit.size()); }

  int obs_subject(int k) const { return visit_subject[obs_visit[k]]; }
  int visits_of(int subject) const { return static_cast<int>(subject_visits[subject].size()); }
  /// Number of observations of subject i.
  int obs_count(int subject) const;
  /// Per-region observation counts of subject i.
  Vector region_counts(int subject) const;
  /// True if column 0 of X is identically one.
  bool has_intercept() const;
  /// Index of a design column by name, or -1.
  int covariate_index(const std::string& name) const;

  /// Rebuild subject/visit/region indices.
  void build_index();
  /// Check every structural invariant; throws SchemaError / DimensionMismatch.
  void validate() const;

  /// Subset of subjects (indices into subject_ids), re-indexed.
  LongDataset subset(const std::vector<int>& subjects) const;
};

/// Design matrix from raw visit-level covariates: intercept, then each raw
/// column; numeric columns enter as-is, non-numeric ones are treatment coded
/// against their first level in sorted order.
void build_design(LongDataset& data);

/// Read `subject,visit,region,y[,age,sex,abnormal,extra...]`.
LongDataset load_dataset(const std::string& path);
void write_dataset(const std::string& path, const LongDataset& data);

}  // namespace lsnm
