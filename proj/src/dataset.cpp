#include "lsnm/dataset.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "lsnm/csv.hpp"

namespace lsnm {

int LongDataset::obs_count(int subject) const {
  int count = 0;
  for (int v : subject_visits[subject]) count += static_cast<int>(visit_obs[v].size());
  return count;
}

Vector LongDataset::region_counts(int subject) const {
  Vector c = Vector::Zero(n_regions());
  for (int v : subject_visits[subject])
    for (int k : visit_obs[v]) c[obs_region[k]] += 1.0;
  return c;
}

bool LongDataset::has_intercept() const {
  return X.cols() > 0 && (X.rows() == 0 || (X.col(0).array() == 1.0).all());
}

int LongDataset::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
  return it == covariate_names.end() ? -1 : static_cast<int>(it - covariate_names.begin());
}

void LongDataset::build_index() {
  subject_visits.assign(n_subjects(), {});
  visit_obs.assign(n_visits(), {});
  region_obs.assign(n_regions(), {});
  for (int v = 0; v < n_visits(); ++v) subject_visits[visit_subject[v]].push_back(v);
  for (int k = 0; k < n_obs(); ++k) {
    visit_obs[obs_visit[k]].push_back(k);
    region_obs[obs_region[k]].push_back(k);
  }
}

void LongDataset::validate() const {
  const auto nv = static_cast<std::size_t>(n_visits());
  if (visit_number.size() != nv || static_cast<std::size_t>(X.rows()) != nv)
    throw DimensionMismatch("visit arrays disagree in length");
  if (obs_region.size() != obs_visit.size() || static_cast<std::size_t>(y.size()) != obs_visit.size())
    throw DimensionMismatch("observation arrays disagree in length");
  if (static_cast<int>(reference_flag.size()) != n_subjects())
    throw DimensionMismatch("reference flags must be given per subject");
  if (static_cast<int>(covariate_names.size()) != n_covariates())
    throw DimensionMismatch("covariate names do not match design width");
  if (static_cast<int>(subject_visits.size()) != n_subjects() || static_cast<int>(visit_obs.size()) != n_visits())
    throw DimensionMismatch("index not built");
  std::set<std::pair<int, int>> seen_visits;
  for (int v = 0; v < n_visits(); ++v) {
    if (visit_subject[v] < 0 || visit_subject[v] >= n_subjects()) throw SchemaError("visit refers to unknown subject");
    if (visit_number[v] < 1) throw SchemaError("visit numbers start at 1");
    if (!seen_visits.insert({visit_subject[v], visit_number[v]}).second)
      throw SchemaError("duplicate visit " + std::to_string(visit_number[v]) + " for subject " +
                        subject_ids[visit_subject[v]]);
  }
  std::set<std::pair<int, int>> seen_obs;
  for (int k = 0; k < n_obs(); ++k) {
    if (obs_visit[k] < 0 || obs_visit[k] >= n_visits()) throw SchemaError("observation refers to unknown visit");
    if (obs_region[k] < 0 || obs_region[k] >= n_regions()) throw SchemaError("observation refers to unknown region");
    if (!seen_obs.insert({obs_visit[k], obs_region[k]}).second)
      throw SchemaError("duplicate (subject, visit, region) triple for subject " + subject_ids[obs_subject(k)]);
    if (!std::isfinite(y[k])) throw SchemaError("non-finite response");
  }
}

LongDataset LongDataset::subset(const std::vector<int>& subjects) const {
  LongDataset out;
  out.region_labels = region_labels;
  out.raw_covariate_names = raw_covariate_names;
  out.covariate_names = covariate_names;
  std::vector<int> visit_map(n_visits(), -1);
  std::vector<int> rows;
  for (int s : subjects) {
    const int ns = out.n_subjects();
    out.subject_ids.push_back(subject_ids[s]);
    out.reference_flag.push_back(reference_flag[s]);
    for (int v : subject_visits[s]) {
      visit_map[v] = static_cast<int>(out.visit_subject.size());
      out.visit_subject.push_back(ns);
      out.visit_number.push_back(visit_number[v]);
      out.raw_covariates.push_back(raw_covariates[v]);
      rows.push_back(v);
    }
  }
  out.X.resize(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.X.row(static_cast<Index>(i)) = X.row(rows[i]);
  std::vector<double> ys;
  for (int k = 0; k < n_obs(); ++k) {
    if (visit_map[obs_visit[k]] < 0) continue;
    out.obs_visit.push_back(visit_map[obs_visit[k]]);
    out.obs_region.push_back(obs_region[k]);
    ys.push_back(y[k]);
  }
  out.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
  out.build_index();
  return out;
}

void build_design(LongDataset& data) {
  const auto nv = static_cast<Index>(data.raw_covariates.size());
  std::vector<std::string> names{"(intercept)"};
  std::vector<Vector> cols{Vector::Ones(nv)};
  for (std::size_t c = 0; c < data.raw_covariate_names.size(); ++c) {
    bool numeric = true;
    for (const auto& row : data.raw_covariates)
      if (!csv::is_number(row[c])) {
        numeric = false;
        break;
      }
    if (numeric) {
      Vector col(nv);
      for (Index v = 0; v < nv; ++v) col[v] = csv::parse_double(data.raw_covariates[v][c], data.raw_covariate_names[c]);
      names.push_back(data.raw_covariate_names[c]);
      cols.push_back(std::move(col));
      continue;
    }
    std::set<std::string> levels;
    for (const auto& row : data.raw_covariates) levels.insert(row[c]);
    auto it = levels.begin();
    for (++it; it != levels.end(); ++it) {
      Vector col(nv);
      for (Index v = 0; v < nv; ++v) col[v] = data.raw_covariates[v][c] == *it ? 1.0 : 0.0;
      names.push_back(data.raw_covariate_names[c] + "[" + *it + "]");
      cols.push_back(std::move(col));
    }
  }
  data.covariate_names = names;
  data.X.resize(nv, static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) data.X.col(static_cast<Index>(j)) = cols[j];
}

LongDataset load_dataset(const std::string& path) {
  const auto table = csv::read(path);
  const int cs = table.require("subject", path);
  const int cv = table.require("visit", path);
  const int cr = table.require("region", path);
  const int cy = table.require("y", path);
  const int ca = table.column("abnormal");
  if (table.rows.empty()) throw SchemaError(path + ": dataset has no observations");

  LongDataset data;
  std::vector<int> cov_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const int ci = static_cast<int>(c);
    if (ci == cs || ci == cv || ci == cr || ci == cy || ci == ca) continue;
    cov_cols.push_back(ci);
    data.raw_covariate_names.push_back(table.header[c]);
  }

  std::unordered_map<std::string, int> subject_index;
  std::unordered_map<std::string, int> region_index;
  std::map<std::pair<int, int>, int> visit_index;
  std::vector<double> ys;
  for (const auto& row : table.rows) {
    auto [sit, snew] = subject_index.try_emplace(row[cs], data.n_subjects());
    if (snew) {
      data.subject_ids.push_back(row[cs]);
      data.reference_flag.push_back(0);
    }
    const int s = sit->second;
    auto [rit, rnew] = region_index.try_emplace(row[cr], data.n_regions());
    if (rnew) data.region_labels.push_back(row[cr]);
    const int t = static_cast<int>(csv::parse_int(row[cv], path + " (visit)"));
    if (t < 1) throw SchemaError(path + ": visit numbers start at 1 (subject " + row[cs] + ")");
    if (ca >= 0) {
      const auto g = csv::parse_int(row[ca], path + " (abnormal)");
      if (g != 0 && g != 1) throw SchemaError(path + ": abnormal flag must be 0 or 1");
      if (!snew && data.reference_flag[s] != g)
        throw SchemaError(path + ": abnormal flag varies within subject " + row[cs]);
      data.reference_flag[s] = static_cast<int>(g);
    }
    std::vector<std::string> covs;
    for (int c : cov_cols) covs.push_back(row[c]);
    auto [vit, vnew] = visit_index.try_emplace({s, t}, data.n_visits());
    if (vnew) {
      data.visit_subject.push_back(s);
      data.visit_number.push_back(t);
      data.raw_covariates.push_back(std::move(covs));
    } else if (data.raw_covariates[vit->second] != covs) {
      throw SchemaError(path + ": covariates differ across regions for subject " + row[cs] + " visit " +
                        std::to_string(t));
    }
    data.obs_visit.push_back(vit->second);
    data.obs_region.push_back(rit->second);
    ys.push_back(csv::parse_double(row[cy], path + " (y)"));
  }
  data.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
  build_design(data);
  data.build_index();
  data.validate();
  return data;
}

void write_dataset(const std::string& path, const LongDataset& data) {
  csv::Writer out(path);
  std::vector<std::string> header{"subject", "visit", "region", "y"};
  const auto is_age_sex = [](const std::string& n) { return n == "age" || n == "sex"; };
  // canonical order: subject,visit,region,y,age,sex,abnormal,extras...
  std::vector<std::size_t> front, extras;
  for (std::size_t c = 0; c < data.raw_covariate_names.size(); ++c)
    (is_age_sex(data.raw_covariate_names[c]) ? front : extras).push_back(c);
  for (auto c : front) header.push_back(data.raw_covariate_names[c]);
  header.push_back("abnormal");
  for (auto c : extras) header.push_back(data.raw_covariate_names[c]);
  out.row(header);
  for (int k = 0; k < data.n_obs(); ++k) {
    const int v = data.obs_visit[k];
    const int s = data.visit_subject[v];
    std::vector<std::string> row{data.subject_ids[s], std::to_string(data.visit_number[v]),
                                 data.region_labels[data.obs_region[k]], csv::format_double(data.y[k])};
    for (auto c : front) row.push_back(data.raw_covariates[v][c]);
    row.push_back(std::to_string(data.reference_flag[s]));
    for (auto c : extras) row.push_back(data.raw_covariates[v][c]);
    out.row(row);
  }
}

}  // namespace lsnm
