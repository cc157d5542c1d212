#include "lsnm/baselines.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace lsnm {

ModelKind parse_model_kind(const std::string& s) {
  if (s == "spatial") return ModelKind::spatial;
  if (s == "longitudinal") return ModelKind::longitudinal;
  if (s == "cross_sectional") return ModelKind::cross_sectional;
  throw ConfigInvalid("model must be one of {spatial, longitudinal, cross_sectional}, got '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::spatial:
      return "spatial";
    case ModelKind::longitudinal:
      return "longitudinal";
    case ModelKind::cross_sectional:
      return "cross_sectional";
  }
  return "?";
}

namespace {

// Per-region normal equations, factorized once.
struct RegionLs {
  std::vector<Eigen::LDLT<Matrix>> factors;

  explicit RegionLs(const LongDataset& data) {
    const int p = data.n_covariates();
    for (int r = 0; r < data.n_regions(); ++r) {
      const auto& obs = data.region_obs[r];
      if (static_cast<int>(obs.size()) < p)
        throw RankDeficientDesign("region " + data.region_labels[r] + " has fewer observations than covariates");
      Matrix xr(static_cast<Index>(obs.size()), p);
      for (std::size_t k = 0; k < obs.size(); ++k) xr.row(static_cast<Index>(k)) = data.X.row(data.obs_visit[obs[k]]);
      Eigen::ColPivHouseholderQR<Matrix> qr(xr);
      if (qr.rank() < p) throw RankDeficientDesign("design is rank deficient in region " + data.region_labels[r]);
      factors.emplace_back(xr.transpose() * xr);
    }
  }

  // Solve for B given per-observation targets.
  Matrix solve(const LongDataset& data, const Vector& target) const {
    Matrix B(data.n_covariates(), data.n_regions());
    for (int r = 0; r < data.n_regions(); ++r) {
      Vector xty = Vector::Zero(data.n_covariates());
      for (int k : data.region_obs[r]) xty += data.X.row(data.obs_visit[k]).transpose() * target[k];
      B.col(r) = factors[r].solve(xty);
    }
    return B;
  }
};

Vector fixed_residuals(const LongDataset& data, const Matrix& B) {
  const Matrix xb = data.X * B;
  Vector e(data.n_obs());
  for (int k = 0; k < data.n_obs(); ++k) e[k] = data.y[k] - xb(data.obs_visit[k], data.obs_region[k]);
  return e;
}

void copy_labels(const LongDataset& data, BaselineFit& fit) {
  fit.covariate_names = data.covariate_names;
  fit.region_labels = data.region_labels;
  fit.subject_ids = data.subject_ids;
}

}  // namespace

BaselineFit fit_cross_sectional(const LongDataset& data) {
  const RegionLs ls(data);
  BaselineFit fit;
  fit.kind = ModelKind::cross_sectional;
  fit.B = ls.solve(data, data.y);
  const Vector e = fixed_residuals(data, fit.B);
  const int dof = data.n_obs() - data.n_covariates() * data.n_regions();
  const double var = e.squaredNorm() / (dof > 0 ? dof : std::max(1, data.n_obs()));
  fit.sigma = std::sqrt(std::max(var, variance_floor));
  fit.log_likelihood = 0.0;
  for (int k = 0; k < data.n_obs(); ++k) fit.log_likelihood += normal_log_density(e[k], 0.0, fit.sigma * fit.sigma);
  copy_labels(data, fit);
  return fit;
}

double random_intercept_log_likelihood(const LongDataset& data, const Matrix& B, double sigma, double sigma_b) {
  const Vector e = fixed_residuals(data, B);
  const double s2 = sigma * sigma, sb2 = sigma_b * sigma_b;
  double ll = 0.0;
  for (int i = 0; i < data.n_subjects(); ++i) {
    double sum = 0.0, sq = 0.0;
    int n_i = 0;
    for (int v : data.subject_visits[i])
      for (int k : data.visit_obs[v]) {
        sum += e[k];
        sq += e[k] * e[k];
        ++n_i;
      }
    if (n_i == 0) continue;
    // matrix determinant lemma and Sherman-Morrison for s2 I + sb2 11'
    const double denom = s2 + n_i * sb2;
    const double log_det = (n_i - 1) * std::log(s2) + std::log(denom);
    const double quad = (sq - sb2 * sum * sum / denom) / s2;
    ll += -0.5 * (n_i * std::log(2.0 * std::numbers::pi) + log_det + quad);
  }
  return ll;
}

BaselineFit fit_longitudinal(const LongDataset& data, const EmOptions& options) {
  if (data.n_subjects() < 2) throw ConfigInvalid("longitudinal fit needs at least 2 subjects");
  bool repeated = false;
  for (int i = 0; i < data.n_subjects(); ++i) repeated = repeated || data.visits_of(i) >= 2;
  if (!repeated) throw ConfigInvalid("longitudinal fit needs a subject with at least 2 visits");

  const RegionLs ls(data);
  const int n = data.n_subjects();
  std::vector<int> n_obs(n, 0);
  for (int i = 0; i < n; ++i) n_obs[i] = data.obs_count(i);

  BaselineFit fit;
  fit.kind = ModelKind::longitudinal;
  fit.B = ls.solve(data, data.y);
  Vector e = fixed_residuals(data, fit.B);
  double s2 = std::max(e.squaredNorm() / data.n_obs(), variance_floor);
  double sb2 = 0.5 * s2;
  s2 *= 0.5;
  Vector m = Vector::Zero(n), v = Vector::Zero(n);

  auto e_step = [&] {
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int vis : data.subject_visits[i])
        for (int k : data.visit_obs[vis]) sum += e[k];
      v[i] = 1.0 / (1.0 / sb2 + n_obs[i] / s2);
      m[i] = v[i] * sum / s2;
    }
  };

  double ll = random_intercept_log_likelihood(data, fit.B, std::sqrt(s2), std::sqrt(sb2));
  fit.log_likelihood_trace.push_back(ll);
  fit.converged = false;
  Vector target(data.n_obs());
  int it = 0;
  while (it < options.max_iter) {
    ++it;
    e_step();
    for (int k = 0; k < data.n_obs(); ++k) target[k] = data.y[k] - m[data.obs_subject(k)];
    fit.B = ls.solve(data, target);
    e = fixed_residuals(data, fit.B);
    double rss = 0.0, extra = 0.0;
    for (int k = 0; k < data.n_obs(); ++k) {
      const double r = e[k] - m[data.obs_subject(k)];
      rss += r * r;
    }
    for (int i = 0; i < n; ++i) extra += n_obs[i] * v[i];
    s2 = std::max((rss + extra) / data.n_obs(), variance_floor);
    sb2 = std::max((m.squaredNorm() + v.sum()) / n, variance_floor);
    const double next = random_intercept_log_likelihood(data, fit.B, std::sqrt(s2), std::sqrt(sb2));
    fit.log_likelihood_trace.push_back(next);
    const double change = std::abs(next - ll);
    ll = next;
    if (change <= options.tolerance * (std::abs(ll) + 1.0)) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = it;
  fit.log_likelihood = ll;
  if (!fit.converged && options.throw_on_nonconvergence)
    throw NonConvergence("EM did not converge in " + std::to_string(options.max_iter) + " iterations");
  fit.sigma = std::sqrt(s2);
  fit.sigma_b = std::sqrt(sb2);
  e_step();
  fit.b = m;
  copy_labels(data, fit);
  return fit;
}

namespace {

void check_fit(const LongDataset& data, const BaselineFit& fit) {
  if (fit.B.rows() != data.n_covariates() || fit.B.cols() != data.n_regions())
    throw IncompatibleFit("fit has a " + std::to_string(fit.B.rows()) + " x " + std::to_string(fit.B.cols()) +
                          " coefficient matrix; data need " + std::to_string(data.n_covariates()) + " x " +
                          std::to_string(data.n_regions()));
}

}  // namespace

PredictiveMoments baseline_predictive(const LongDataset& data, const BaselineFit& fit, ScoreMode mode) {
  check_fit(data, fit);
  const Vector e = fixed_residuals(data, fit.B);
  PredictiveMoments out;
  out.mean = data.y - e;
  const double s2 = std::max(fit.sigma * fit.sigma, variance_floor);
  if (fit.kind == ModelKind::cross_sectional) {
    out.var = Vector::Constant(data.n_obs(), s2);
    return out;
  }
  const double sb2 = fit.sigma_b * fit.sigma_b;
  if (mode == ScoreMode::marginal) {
    out.var = Vector::Constant(data.n_obs(), s2 + sb2);
    return out;
  }
  out.var.resize(data.n_obs());
  for (int i = 0; i < data.n_subjects(); ++i) {
    double total = 0.0;
    int count = 0;
    for (int v : data.subject_visits[i])
      for (int k : data.visit_obs[v]) {
        total += e[k];
        ++count;
      }
    for (int v : data.subject_visits[i]) {
      double held = 0.0;
      for (int k : data.visit_obs[v]) held += e[k];
      const int rest = count - static_cast<int>(data.visit_obs[v].size());
      const double post_var = sb2 > 0.0 ? 1.0 / (1.0 / sb2 + rest / s2) : 0.0;
      const double post_mean = post_var * (total - held) / s2;
      for (int k : data.visit_obs[v]) {
        out.mean[k] += post_mean;
        out.var[k] = s2 + post_var;
      }
    }
  }
  return out;
}

Vector baseline_fitted(const LongDataset& data, const BaselineFit& fit) {
  check_fit(data, fit);
  Vector mu = data.y - fixed_residuals(data, fit.B);
  if (fit.kind == ModelKind::longitudinal) {
    if (fit.b.size() != data.n_subjects()) throw IncompatibleFit("fit carries BLUPs for a different subject set");
    for (int k = 0; k < data.n_obs(); ++k) mu[k] += fit.b[data.obs_subject(k)];
  }
  return mu;
}

Matrix baseline_deviation_map(const LongDataset& data, const BaselineFit& fit) {
  const Vector e = data.y - baseline_fitted(data, fit);
  Matrix sums = Matrix::Zero(data.n_subjects(), data.n_regions());
  Matrix counts = sums;
  for (int k = 0; k < data.n_obs(); ++k) {
    sums(data.obs_subject(k), data.obs_region[k]) += e[k];
    counts(data.obs_subject(k), data.obs_region[k]) += 1.0;
  }
  return (counts.array() > 0.0).select(sums.array() / counts.array().max(1.0), 0.0);
}

Matrix baseline_detection_score(const LongDataset& data, const BaselineFit& fit, const Matrix& u_hat) {
  Matrix counts = Matrix::Zero(data.n_subjects(), data.n_regions());
  for (int k = 0; k < data.n_obs(); ++k) counts(data.obs_subject(k), data.obs_region[k]) += 1.0;
  const double sd = std::sqrt(std::max(fit.sigma * fit.sigma, variance_floor));
  return (u_hat.array() * counts.array().sqrt() / sd).matrix();
}

void write_baseline_json(const std::string& path, const BaselineFit& fit) {
  using nlohmann::json;
  json j;
  j["model"] = to_string(fit.kind);
  j["covariates"] = fit.covariate_names;
  j["regions"] = fit.region_labels;
  j["subjects"] = fit.subject_ids;
  json rows = json::array();
  for (Index r = 0; r < fit.B.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(fit.B.cols()));
    for (Index c = 0; c < fit.B.cols(); ++c) row[static_cast<std::size_t>(c)] = fit.B(r, c);
    rows.push_back(row);
  }
  j["B"] = rows;
  j["sigma"] = fit.sigma;
  if (fit.kind == ModelKind::longitudinal) {
    j["sigma_b"] = fit.sigma_b;
    j["b"] = std::vector<double>(fit.b.data(), fit.b.data() + fit.b.size());
  }
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["log_likelihood"] = fit.log_likelihood;
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot write " + path);
  out << j.dump(2) << '\n';
}

BaselineFit read_baseline_json(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
    BaselineFit fit;
    fit.kind = parse_model_kind(j.at("model").get<std::string>());
    if (fit.kind == ModelKind::spatial) throw IncompatibleFit(path + " holds a spatial fit");
    fit.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    fit.region_labels = j.at("regions").get<std::vector<std::string>>();
    fit.subject_ids = j.at("subjects").get<std::vector<std::string>>();
    const auto rows = j.at("B").get<std::vector<std::vector<double>>>();
    fit.B.resize(static_cast<Index>(rows.size()), static_cast<Index>(fit.region_labels.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != fit.region_labels.size()) throw SchemaError(path + ": ragged coefficient matrix");
      for (std::size_t c = 0; c < rows[r].size(); ++c) fit.B(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
    fit.sigma = j.at("sigma").get<double>();
    if (fit.kind == ModelKind::longitudinal) {
      fit.sigma_b = j.at("sigma_b").get<double>();
      const auto b = j.at("b").get<std::vector<double>>();
      fit.b = Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size()));
    }
    fit.iterations = j.value("iterations", 0);
    fit.converged = j.value("converged", true);
    fit.log_likelihood = j.value("log_likelihood", 0.0);
    return fit;
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

}  // namespace lsnm
