#include "lsnm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <thread>

#include "json.hpp"
#include "lsnm/csv.hpp"
#include "lsnm/diagnostics.hpp"

namespace lsnm {

void SamplerConfig::check() const {
  if (n_chains < 1 || n_warmup < 0 || n_samples < 1 || thin < 1)
    throw ConfigInvalid("sampler counts must be positive (chains, samples, thin >= 1; warmup >= 0)");
  if (n_samples / thin < 1) throw ConfigInvalid("thin leaves no retained draws");
  if (!(rho_step > 0.0) || !(scale_step > 0.0)) throw ConfigInvalid("sampler step sizes must be positive");
}

std::string beta_name(int j, int r) { return "B[" + std::to_string(j) + "][" + std::to_string(r) + "]"; }
std::string b_name(int i) { return "b[" + std::to_string(i) + "]"; }

int PosteriorDraws::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

Matrix PosteriorDraws::param(const std::string& name) const {
  const int c = index_of(name);
  if (c < 0) throw ConfigInvalid("unknown parameter '" + name + "'");
  Matrix out(n_kept(), n_chains());
  for (int m = 0; m < n_chains(); ++m) out.col(m) = chains[m].col(c);
  return out;
}

std::vector<GlobalParams> PosteriorDraws::global_draws(std::size_t max_draws) const {
  const std::size_t kept = static_cast<std::size_t>(n_kept());
  const std::size_t total = kept * chains.size();
  const std::size_t count = (max_draws == 0 || max_draws >= total) ? total : max_draws;
  const int i_sigma = index_of("sigma"), i_sigma_b = index_of("sigma_b");
  const int i_tau = index_of("tau_u"), i_rho = index_of("rho");
  const int i_b0 = index_of(beta_name(0, 0));
  std::vector<GlobalParams> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t idx = count == total ? k : k * total / count;
    const Matrix& c = chains[idx / kept];
    const auto row = static_cast<Index>(idx % kept);
    GlobalParams g;
    g.B.resize(n_covariates, n_regions);
    for (int r = 0; r < n_regions; ++r)
      for (int j = 0; j < n_covariates; ++j) g.B(j, r) = c(row, i_b0 + r * n_covariates + j);
    g.sigma = c(row, i_sigma);
    g.sigma_b = c(row, i_sigma_b);
    g.tau_u = i_tau >= 0 ? c(row, i_tau) : 0.0;
    g.rho = i_rho >= 0 ? c(row, i_rho) : 0.0;
    out.push_back(std::move(g));
  }
  return out;
}

ModelState PosteriorDraws::posterior_mean() const {
  Vector means = Vector::Zero(static_cast<Index>(names.size()));
  Index total = 0;
  for (const Matrix& c : chains) {
    means += c.colwise().sum().transpose();
    total += c.rows();
  }
  means /= static_cast<double>(std::max<Index>(total, 1));
  ModelState s = ModelState::zeros(n_covariates, n_subjects, n_regions);
  const int i_b0 = index_of(beta_name(0, 0));
  for (int r = 0; r < n_regions; ++r)
    for (int j = 0; j < n_covariates; ++j) s.B(j, r) = means[i_b0 + r * n_covariates + j];
  for (int i = 0; i < n_subjects; ++i) s.b[i] = means[index_of(b_name(i))];
  if (u_mean.rows() == n_subjects && u_mean.cols() == n_regions) s.u = u_mean;
  s.sigma = means[index_of("sigma")];
  s.sigma_b = means[index_of("sigma_b")];
  s.tau_u = index_of("tau_u") >= 0 ? means[index_of("tau_u")] : 0.0;
  s.rho = index_of("rho") >= 0 ? means[index_of("rho")] : 0.0;
  return s;
}

namespace {

double sorted_quantile(const std::vector<double>& v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void PosteriorDraws::summarize() {
  summaries.clear();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& name : names) {
    const Matrix m = param(name);
    std::vector<double> v(m.data(), m.data() + m.size());
    ParamSummary s;
    s.name = name;
    if (v.empty()) {
      summaries.push_back(s);
      continue;
    }
    const Eigen::Map<const Vector> flat(v.data(), static_cast<Index>(v.size()));
    s.mean = flat.mean();
    s.sd = v.size() > 1 ? std::sqrt((flat.array() - s.mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
    std::sort(v.begin(), v.end());
    s.median = sorted_quantile(v, 0.5);
    s.q05 = sorted_quantile(v, 0.05);
    s.q95 = sorted_quantile(v, 0.95);
    s.rhat = (m.cols() >= 2 && m.rows() >= 4) ? split_rhat(m) : nan;
    s.ess_bulk = m.rows() >= 4 ? bulk_ess(m) : nan;
    summaries.push_back(s);
  }
}

GibbsSampler::GibbsSampler(const LongDataset& data, const RegionGraph& graph, PriorConfig prior,
                           SamplerConfig config)
    : data_(data), graph_(graph), prior_(prior), config_(config) {
  prior_.check();
  config_.check();
  if (graph.n_regions() != data.n_regions()) throw DimensionMismatch("graph and dataset disagree on region count");
  interval_ = graph.admissible_interval();
  const int p = data.n_covariates();
  const int r_count = data.n_regions();
  region_xtx_.assign(r_count, Matrix::Zero(p, p));
  region_xty_.assign(r_count, Vector::Zero(p));
  cell_x_.assign(data.n_subjects(), Matrix::Zero(p, r_count));
  cell_y_ = Matrix::Zero(data.n_subjects(), r_count);
  for (int k = 0; k < data.n_obs(); ++k) {
    const auto x = data.X.row(data.obs_visit[k]);
    const int r = data.obs_region[k], i = data.obs_subject(k);
    region_xtx_[r].noalias() += x.transpose() * x;
    region_xty_[r] += x.transpose() * data.y[k];
    cell_x_[i].col(r) += x.transpose();
    cell_y_(i, r) += data.y[k];
  }
  std::map<std::vector<double>, int> by_counts;
  subject_obs_.assign(data.n_subjects(), 0);
  for (int i = 0; i < data.n_subjects(); ++i) {
    const Vector c = data.region_counts(i);
    subject_obs_[i] = static_cast<int>(c.sum());
    std::vector<double> key(c.data(), c.data() + c.size());
    auto [it, fresh] = by_counts.try_emplace(key, static_cast<int>(patterns_.size()));
    if (fresh) patterns_.push_back({c, {}});
    patterns_[it->second].subjects.push_back(i);
  }
  intercept_ = data.has_intercept() && data.n_covariates() > 0;

  names_ = {"sigma", "sigma_b"};
  if (config_.spatial) {
    names_.push_back("tau_u");
    names_.push_back("rho");
  }
  for (int r = 0; r < r_count; ++r)
    for (int j = 0; j < p; ++j) names_.push_back(beta_name(j, r));
  for (int i = 0; i < data.n_subjects(); ++i) names_.push_back(b_name(i));
}

double GibbsSampler::rho_to_logit(double rho) const {
  const double s = (rho - interval_.lo) / interval_.width();
  return std::log(s) - std::log1p(-s);
}

double GibbsSampler::logit_to_rho(double v) const {
  return interval_.lo + interval_.width() / (1.0 + std::exp(-v));
}

ModelState GibbsSampler::initial_state() const {
  const int p = data_.n_covariates();
  ModelState s = ModelState::zeros(p, data_.n_subjects(), data_.n_regions());
  double ssr = 0.0;
  for (int r = 0; r < data_.n_regions(); ++r) {
    Vector xty = Vector::Zero(p);
    for (int k : data_.region_obs[r]) xty += data_.X.row(data_.obs_visit[k]).transpose() * data_.y[k];
    Matrix a = region_xtx_[r];
    a.diagonal().array() += 1e-8 * std::max(1.0, a.diagonal().maxCoeff());
    s.B.col(r) = a.ldlt().solve(xty);
    for (int k : data_.region_obs[r]) {
      const double e = data_.y[k] - data_.X.row(data_.obs_visit[k]).dot(s.B.col(r));
      ssr += e * e;
    }
  }
  const int dof = data_.n_obs() - p * data_.n_regions();
  double sd = dof > 0 ? std::sqrt(ssr / dof) : 1.0;
  if (!(sd > 1e-6) || !std::isfinite(sd)) sd = 1.0;
  s.sigma = s.sigma_b = sd;
  s.tau_u = config_.spatial ? sd : 0.0;
  s.rho = config_.spatial ? interval_.midpoint() : 0.0;
  return s;
}

GaussianMoments<double> GibbsSampler::beta_conditional(const ModelState& s, int r) const {
  const int p = data_.n_covariates();
  const double prec = 1.0 / (s.sigma * s.sigma);
  Matrix a = prec * region_xtx_[r];
  a.diagonal().array() += 1.0 / (prior_.sigma_beta * prior_.sigma_beta);
  Vector h = Vector::Zero(p);
  for (int k : data_.region_obs[r]) {
    const int v = data_.obs_visit[k];
    const int i = data_.visit_subject[v];
    h += data_.X.row(v).transpose() * (prec * (data_.y[k] - s.b[i] - s.u(i, r)));
  }
  return canonical_to_moments(a, h);
}

GaussianMoments<double> GibbsSampler::b_conditional(const ModelState& s, int i) const {
  const double prec = 1.0 / (s.sigma * s.sigma);
  double lin = 0.0;
  for (int v : data_.subject_visits[i])
    for (int k : data_.visit_obs[v]) {
      const int r = data_.obs_region[k];
      lin += prec * (data_.y[k] - data_.X.row(v).dot(s.B.col(r)) - s.u(i, r));
    }
  const double a = 1.0 / (s.sigma_b * s.sigma_b) + prec * subject_obs_[i];
  GaussianMoments<double> out;
  out.mean = Vector::Constant(1, lin / a);
  out.cov = Matrix::Constant(1, 1, 1.0 / a);
  return out;
}

void GibbsSampler::gibbs_beta(ModelState& s, RandomStream& rng) const {
  const int p = data_.n_covariates();
  const double prec = 1.0 / (s.sigma * s.sigma);
  for (int r = 0; r < data_.n_regions(); ++r) {
    Matrix a = prec * region_xtx_[r];
    a.diagonal().array() += 1.0 / (prior_.sigma_beta * prior_.sigma_beta);
    Vector h = Vector::Zero(p);
    for (int k : data_.region_obs[r]) {
      const int v = data_.obs_visit[k];
      const int i = data_.visit_subject[v];
      h += data_.X.row(v).transpose() * (prec * (data_.y[k] - s.b[i] - s.u(i, r)));
    }
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw SingularPrecision("coefficient precision is singular in region " +
                                                              std::to_string(r));
    s.B.col(r) = sample_canonical(llt, h, rng);
  }
}

void GibbsSampler::gibbs_b(ModelState& s, RandomStream& rng) const {
  const double prec = 1.0 / (s.sigma * s.sigma);
  const Matrix xb = data_.X * s.B;
  for (int i = 0; i < data_.n_subjects(); ++i) {
    double lin = 0.0;
    for (int v : data_.subject_visits[i])
      for (int k : data_.visit_obs[v]) {
        const int r = data_.obs_region[k];
        lin += data_.y[k] - xb(v, r) - s.u(i, r);
      }
    const double a = 1.0 / (s.sigma_b * s.sigma_b) + prec * subject_obs_[i];
    s.b[i] = prec * lin / a + rng.gaussian() / std::sqrt(a);
  }
}

Matrix GibbsSampler::residual_sums(const ModelState& s) const {
  const Matrix xb = data_.X * s.B;
  Matrix sums = Matrix::Zero(data_.n_subjects(), data_.n_regions());
  for (int k = 0; k < data_.n_obs(); ++k) {
    const int v = data_.obs_visit[k];
    const int r = data_.obs_region[k];
    const int i = data_.visit_subject[v];
    sums(i, r) += data_.y[k] - xb(v, r) - s.b[i];
  }
  return sums;
}

void GibbsSampler::gibbs_u(ModelState& s, RandomStream& rng) const {
  if (!config_.spatial) return;
  const double prec = 1.0 / (s.sigma * s.sigma);
  const Matrix q = graph_.precision(s.rho) / (s.tau_u * s.tau_u);
  const Matrix sums = residual_sums(s);
  for (const Pattern& pat : patterns_) {
    Matrix a = q;
    a.diagonal() += prec * pat.counts;
    const auto llt = spd_factor(a);
    for (int i : pat.subjects) {
      const Vector h = prec * sums.row(i).transpose();
      s.u.row(i) = sample_canonical(llt, h, rng).transpose();
    }
  }
}

void GibbsSampler::shift_moves(ModelState& s, RandomStream& rng) const {
  const int n = data_.n_subjects();
  const int r_count = data_.n_regions();
  const double sb2 = s.sigma_b * s.sigma_b;
  const double beta2 = prior_.sigma_beta * prior_.sigma_beta;
  auto draw = [&](double a, double lin) { return lin / a + rng.gaussian() / std::sqrt(a); };

  if (config_.spatial && n > 0) {
    const double t2 = s.tau_u * s.tau_u;
    const Matrix q = graph_.precision(s.rho);
    const Vector q1 = q.rowwise().sum();
    const double one_q_one = q1.sum();
    Matrix qu = s.u * q;  // row i = (Q u_i)'
    for (int i = 0; i < n; ++i) {
      const double a = 1.0 / sb2 + one_q_one / t2;
      const double c = draw(a, -s.b[i] / sb2 + qu.row(i).sum() / t2);
      s.b[i] += c;
      s.u.row(i).array() -= c;
      qu.row(i) -= c * q1.transpose();
    }
    if (intercept_) {
      for (int r = 0; r < r_count; ++r) {
        const double a = n * q(r, r) / t2 + 1.0 / beta2;
        const double c = draw(a, -qu.col(r).sum() / t2 + s.B(0, r) / beta2);
        s.u.col(r).array() += c;
        s.B(0, r) -= c;
        qu.rowwise() += c * q.col(r).transpose();
      }
    }
  }
  if (intercept_ && n > 0) {
    const double a = n / sb2 + r_count / beta2;
    const double c = draw(a, -s.b.sum() / sb2 + s.B.row(0).sum() / beta2);
    s.b.array() += c;
    s.B.row(0).array() -= c;
  }
}

double GibbsSampler::log_scale_target(MhBlock which, double lv, const ModelState& s) const {
  double count = 0.0, quad = 0.0, scale = 1.0;
  switch (which) {
    case MhBlock::sigma: {
      const Matrix xb = data_.X * s.B;
      for (int k = 0; k < data_.n_obs(); ++k) {
        const int v = data_.obs_visit[k];
        const int r = data_.obs_region[k];
        const int i = data_.visit_subject[v];
        const double e = data_.y[k] - xb(v, r) - s.b[i] - s.u(i, r);
        quad += e * e;
      }
      count = data_.n_obs();
      scale = prior_.scale_sigma;
      break;
    }
    case MhBlock::sigma_b:
      quad = s.b.squaredNorm();
      count = data_.n_subjects();
      scale = prior_.scale_sigma_b;
      break;
    case MhBlock::tau_u:
      quad = (s.u * graph_.precision(s.rho)).cwiseProduct(s.u).sum();
      count = static_cast<double>(data_.n_subjects()) * data_.n_regions();
      scale = prior_.scale_tau_u;
      break;
    case MhBlock::rho:
      throw ConfigInvalid("rho is not a scale parameter");
  }
  return -count * lv - 0.5 * quad * std::exp(-2.0 * lv) + half_cauchy_log_density(std::exp(lv), scale) + lv;
}

double GibbsSampler::log_rho_target(double v, const ModelState& s) const {
  const double rho = logit_to_rho(v);
  if (!interval_.contains(rho)) return -std::numeric_limits<double>::infinity();
  const double log_s = -std::log1p(std::exp(-v));
  const double log_1ms = -std::log1p(std::exp(v));
  double lp = prior_.rho_a * log_s + prior_.rho_b * log_1ms;  // Beta(a, b) density times Jacobian s(1 - s)
  const int n = data_.n_subjects();
  if (n > 0) {
    Eigen::LLT<Matrix> llt(graph_.precision(rho));
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const double quad = (s.u * graph_.precision(rho)).cwiseProduct(s.u).sum();
    lp += 0.5 * n * llt_log_det(llt) - 0.5 * quad / (s.tau_u * s.tau_u);
  }
  return lp;
}

std::array<bool, 3> GibbsSampler::mh_scales(ModelState& s, RandomStream& rng,
                                            const std::array<double, 3>& steps) const {
  std::array<bool, 3> accepted{false, false, false};
  const MhBlock blocks[3] = {MhBlock::sigma, MhBlock::sigma_b, MhBlock::tau_u};
  double* values[3] = {&s.sigma, &s.sigma_b, &s.tau_u};
  const int n_blocks = config_.spatial ? 3 : 2;
  for (int b = 0; b < n_blocks; ++b) {
    const double cur = std::log(*values[b]);
    const double prop = cur + steps[b] * rng.gaussian();
    const double lp_cur = log_scale_target(blocks[b], cur, s);
    const double lp_prop = log_scale_target(blocks[b], prop, s);
    if (!std::isfinite(lp_cur)) throw ChainDiverged("non-finite log density in scale update");
    if (std::log(rng.uniform()) < lp_prop - lp_cur) {
      *values[b] = std::exp(prop);
      accepted[b] = true;
    }
  }
  return accepted;
}

bool GibbsSampler::mh_rho(ModelState& s, RandomStream& rng, double step) const {
  if (!config_.spatial) return false;
  const double cur = rho_to_logit(s.rho);
  const double prop = cur + step * rng.gaussian();
  const double lp_cur = log_rho_target(cur, s);
  if (!std::isfinite(lp_cur)) throw ChainDiverged("non-finite log density in rho update");
  const double lp_prop = log_rho_target(prop, s);
  if (std::log(rng.uniform()) < lp_prop - lp_cur) {
    s.rho = logit_to_rho(prop);
    return true;
  }
  return false;
}

namespace {

// Prior precision of (b_i, u_i): diag(1 / sigma_b^2, Q(rho) / tau_u^2); b_i alone when not spatial.
Matrix latent_prior_precision(const RegionGraph& graph, bool spatial, double sigma_b, double tau_u, double rho) {
  const int r = spatial ? graph.n_regions() : 0;
  Matrix p0 = Matrix::Zero(r + 1, r + 1);
  p0(0, 0) = 1.0 / (sigma_b * sigma_b);
  if (spatial) p0.bottomRightCorner(r, r) = graph.precision(rho) / (tau_u * tau_u);
  return p0;
}

// Adds counts / sigma^2 in the (b, u) coordinates.
void add_count_precision(Matrix& p, const Vector& counts, double prec, bool spatial) {
  p(0, 0) += prec * counts.sum();
  if (!spatial) return;
  for (Index r = 0; r < counts.size(); ++r) {
    p(0, r + 1) += prec * counts[r];
    p(r + 1, 0) += prec * counts[r];
    p(r + 1, r + 1) += prec * counts[r];
  }
}

}  // namespace

Matrix GibbsSampler::latent_data_terms(const ModelState& s) const {
  const int dim = config_.spatial ? data_.n_regions() + 1 : 1;
  const double prec = 1.0 / (s.sigma * s.sigma);
  const Matrix xb = data_.X * s.B;
  Matrix h = Matrix::Zero(data_.n_subjects(), dim);
  for (int k = 0; k < data_.n_obs(); ++k) {
    const int v = data_.obs_visit[k];
    const int r = data_.obs_region[k];
    const int i = data_.visit_subject[v];
    const double e = prec * (data_.y[k] - xb(v, r));
    h(i, 0) += e;
    if (config_.spatial) h(i, r + 1) += e;
  }
  return h;
}

double GibbsSampler::log_collapsed_likelihood(const ModelState& s, const Matrix& terms) const {
  if (config_.spatial && !interval_.contains(s.rho)) return -std::numeric_limits<double>::infinity();
  const double prec = 1.0 / (s.sigma * s.sigma);
  const Matrix p0 = latent_prior_precision(graph_, config_.spatial, s.sigma_b, s.tau_u, s.rho);
  Eigen::LLT<Matrix> prior_llt(p0);
  if (prior_llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  double total = 0.5 * data_.n_subjects() * llt_log_det(prior_llt);
  for (const Pattern& pat : patterns_) {
    Matrix p = p0;
    add_count_precision(p, pat.counts, prec, config_.spatial);
    Eigen::LLT<Matrix> llt(p);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const double log_det = llt_log_det(llt);
    for (int i : pat.subjects) {
      const Vector h = terms.row(i).transpose();
      const Vector w = llt.matrixL().solve(h);
      total += 0.5 * w.squaredNorm() - 0.5 * log_det;
    }
  }
  return total;
}

std::array<bool, 3> GibbsSampler::mh_collapsed(ModelState& s, RandomStream& rng,
                                               const std::array<double, 3>& steps) const {
  std::array<bool, 3> accepted{false, false, false};
  const Matrix terms = latent_data_terms(s);
  auto log_prior_rho = [&](double v) {
    const double log_s = -std::log1p(std::exp(-v));
    const double log_1ms = -std::log1p(std::exp(v));
    return prior_.rho_a * log_s + prior_.rho_b * log_1ms;
  };
  // target on the unconstrained coordinate of block b
  auto target = [&](int b, const ModelState& st) {
    const double ll = log_collapsed_likelihood(st, terms);
    if (b == 0) return ll + half_cauchy_log_density(st.sigma_b, prior_.scale_sigma_b) + std::log(st.sigma_b);
    if (b == 1) return ll + half_cauchy_log_density(st.tau_u, prior_.scale_tau_u) + std::log(st.tau_u);
    return ll + log_prior_rho(rho_to_logit(st.rho));
  };
  const int n_blocks = config_.spatial ? 3 : 1;
  for (int b = 0; b < n_blocks; ++b) {
    const double lp_cur = target(b, s);
    if (!std::isfinite(lp_cur)) throw ChainDiverged("non-finite collapsed log density");
    ModelState prop = s;
    if (b == 0) prop.sigma_b = s.sigma_b * std::exp(steps[0] * rng.gaussian());
    if (b == 1) prop.tau_u = s.tau_u * std::exp(steps[1] * rng.gaussian());
    if (b == 2) {
      prop.rho = logit_to_rho(rho_to_logit(s.rho) + steps[2] * rng.gaussian());
      if (!interval_.contains(prop.rho)) {
        rng.uniform();
        continue;
      }
    }
    if (std::log(rng.uniform()) < target(b, prop) - lp_cur) {
      s.sigma_b = prop.sigma_b;
      s.tau_u = prop.tau_u;
      s.rho = prop.rho;
      accepted[b] = true;
    }
  }
  return accepted;
}

void GibbsSampler::gibbs_bu(ModelState& s, RandomStream& rng) const {
  const double prec = 1.0 / (s.sigma * s.sigma);
  const Matrix terms = latent_data_terms(s);
  const Matrix p0 = latent_prior_precision(graph_, config_.spatial, s.sigma_b, s.tau_u, s.rho);
  for (const Pattern& pat : patterns_) {
    Matrix p = p0;
    add_count_precision(p, pat.counts, prec, config_.spatial);
    const auto llt = spd_factor(p);
    for (int i : pat.subjects) {
      const Vector theta = sample_canonical(llt, terms.row(i).transpose(), rng);
      s.b[i] = theta[0];
      if (config_.spatial) s.u.row(i) = theta.tail(theta.size() - 1).transpose();
    }
  }
}

void GibbsSampler::beta_marginal_canonical(const ModelState& s, Matrix& a, Vector& h) const {
  const int p = data_.n_covariates();
  const int nr = data_.n_regions();
  const int dim_beta = p * nr;
  const int dim = config_.spatial ? nr + 1 : 1;
  const double prec = 1.0 / (s.sigma * s.sigma);
  a = Matrix::Zero(dim_beta, dim_beta);
  h.resize(dim_beta);
  for (int r = 0; r < nr; ++r) {
    a.block(r * p, r * p, p, p) = prec * region_xtx_[r];
    h.segment(r * p, p) = prec * region_xty_[r];
  }
  a.diagonal().array() += 1.0 / (prior_.sigma_beta * prior_.sigma_beta);
  // Woodbury: subtract G_i P_i^{-1} G_i' where G_i couples vec(B) to (b_i, u_i)
  const Matrix p0 = latent_prior_precision(graph_, config_.spatial, s.sigma_b, s.tau_u, s.rho);
  Matrix g(dim, dim_beta);
  Vector hy(dim);
  for (const Pattern& pat : patterns_) {
    Matrix pp = p0;
    add_count_precision(pp, pat.counts, prec, config_.spatial);
    const auto llt = spd_factor(pp);
    for (int i : pat.subjects) {
      g.setZero();
      hy.setZero();
      for (int r = 0; r < nr; ++r) {
        g.block(0, r * p, 1, p) = prec * cell_x_[i].col(r).transpose();
        hy[0] += prec * cell_y_(i, r);
        if (!config_.spatial) continue;
        g.block(1 + r, r * p, 1, p) = prec * cell_x_[i].col(r).transpose();
        hy[1 + r] = prec * cell_y_(i, r);
      }
      const Matrix m = llt.matrixL().solve(g);
      const Vector w = llt.matrixL().solve(hy);
      a.noalias() -= m.transpose() * m;
      h.noalias() -= m.transpose() * w;
    }
  }
}

GaussianMoments<double> GibbsSampler::beta_marginal_conditional(const ModelState& s) const {
  Matrix a;
  Vector h;
  beta_marginal_canonical(s, a, h);
  return canonical_to_moments(a, h);
}

void GibbsSampler::gibbs_beta_marginal(ModelState& s, RandomStream& rng) const {
  Matrix a;
  Vector h;
  beta_marginal_canonical(s, a, h);
  const Vector beta = sample_canonical(spd_factor(a), h, rng);
  const int p = data_.n_covariates();
  for (int r = 0; r < data_.n_regions(); ++r) s.B.col(r) = beta.segment(r * p, p);
}

void GibbsSampler::record(const ModelState& s, Matrix& kept, Index row) const {
  Index c = 0;
  kept(row, c++) = s.sigma;
  kept(row, c++) = s.sigma_b;
  if (config_.spatial) {
    kept(row, c++) = s.tau_u;
    kept(row, c++) = s.rho;
  }
  for (int r = 0; r < s.B.cols(); ++r)
    for (int j = 0; j < s.B.rows(); ++j) kept(row, c++) = s.B(j, r);
  for (int i = 0; i < s.b.size(); ++i) kept(row, c++) = s.b[i];
}

void GibbsSampler::run_chain(int chain, Matrix& kept, Matrix& u_sum, Matrix& u_sum2,
                             std::array<double, n_mh_blocks>& acceptance) const {
  RandomStream rng(derive_seed(config_.seed, static_cast<std::uint64_t>(chain)));
  ModelState s = initial_state();
  const int n_kept = config_.n_samples / config_.thin;
  kept.resize(n_kept, static_cast<Index>(names_.size()));
  u_sum = Matrix::Zero(data_.n_subjects(), data_.n_regions());
  u_sum2 = u_sum;
  std::array<double, n_mh_blocks> log_step{std::log(config_.scale_step), std::log(config_.scale_step),
                                           std::log(config_.scale_step), std::log(config_.rho_step)};
  std::array<double, n_mh_blocks> accepted{};
  const int total = config_.n_warmup + config_.n_samples;
  Index row = 0;
  for (int it = 0; it < total; ++it) {
    std::array<bool, n_mh_blocks> flags{};
    if (config_.collapsed) {
      const double cur = std::log(s.sigma);
      const double prop = cur + std::exp(log_step[0]) * rng.gaussian();
      const double lp_cur = log_scale_target(MhBlock::sigma, cur, s);
      if (!std::isfinite(lp_cur)) throw ChainDiverged("non-finite log density in sigma update");
      if (std::log(rng.uniform()) < log_scale_target(MhBlock::sigma, prop, s) - lp_cur) {
        s.sigma = std::exp(prop);
        flags[0] = true;
      }
      const auto acc = mh_collapsed(s, rng, {std::exp(log_step[1]), std::exp(log_step[2]), std::exp(log_step[3])});
      flags[1] = acc[0];
      flags[2] = acc[1];
      flags[3] = acc[2];
      gibbs_beta_marginal(s, rng);
      gibbs_bu(s, rng);
      if (config_.center_u) shift_moves(s, rng);
    } else {
      gibbs_beta(s, rng);
      gibbs_b(s, rng);
      gibbs_u(s, rng);
      if (config_.center_u) shift_moves(s, rng);
      const auto acc = mh_scales(s, rng, {std::exp(log_step[0]), std::exp(log_step[1]), std::exp(log_step[2])});
      flags = {acc[0], acc[1], acc[2], mh_rho(s, rng, std::exp(log_step[3]))};
    }

    if (!std::isfinite(s.sigma) || !std::isfinite(s.sigma_b) || !std::isfinite(s.tau_u) ||
        !std::isfinite(s.rho) || !s.B.allFinite() || !s.b.allFinite() || !s.u.allFinite())
      throw ChainDiverged("chain " + std::to_string(chain) + " diverged at iteration " + std::to_string(it));

    if (it < config_.n_warmup) {
      if (config_.adapt) {
        const double gain = std::pow(it + 1.0, -0.6);
        for (int b = 0; b < n_mh_blocks; ++b)
          log_step[b] = std::clamp(log_step[b] + gain * ((flags[b] ? 1.0 : 0.0) - 0.44), -12.0, 4.0);
      }
      continue;
    }
    for (int b = 0; b < n_mh_blocks; ++b) accepted[b] += flags[b] ? 1.0 : 0.0;
    if ((it - config_.n_warmup + 1) % config_.thin != 0 || row >= n_kept) continue;
    record(s, kept, row++);
    u_sum += s.u;
    u_sum2 += s.u.cwiseProduct(s.u);
  }
  for (int b = 0; b < n_mh_blocks; ++b) acceptance[b] = accepted[b] / config_.n_samples;
  if (!config_.spatial) acceptance[2] = acceptance[3] = std::numeric_limits<double>::quiet_NaN();
}

PosteriorDraws GibbsSampler::run() const {
  const int m = config_.n_chains;
  PosteriorDraws out;
  out.names = names_;
  out.n_covariates = data_.n_covariates();
  out.n_regions = data_.n_regions();
  out.n_subjects = data_.n_subjects();
  out.spatial = config_.spatial;
  out.chains.resize(m);
  out.acceptance.resize(m);
  std::vector<Matrix> u_sum(m), u_sum2(m);
  std::vector<std::exception_ptr> errors(m);
  auto work = [&](int c) {
    try {
      run_chain(c, out.chains[c], u_sum[c], u_sum2[c], out.acceptance[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config_.parallel_chains && m > 1) {
    std::vector<std::thread> threads;
    for (int c = 0; c < m; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (int c = 0; c < m; ++c) work(c);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const double total = static_cast<double>(m) * out.n_kept();
  Matrix s1 = Matrix::Zero(out.n_subjects, out.n_regions), s2 = s1;
  for (int c = 0; c < m; ++c) {
    s1 += u_sum[c];
    s2 += u_sum2[c];
  }
  out.u_mean = s1 / total;
  out.u_sd = (s2 / total - out.u_mean.cwiseProduct(out.u_mean)).cwiseMax(0.0).cwiseSqrt();
  out.summarize();
  return out;
}

PosteriorDraws run_sampler(const LongDataset& data, const RegionGraph& graph, const PriorConfig& prior,
                           const SamplerConfig& config) {
  return GibbsSampler(data, graph, prior, config).run();
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  csv::Writer out(path);
  out.row({"chain", "iter", "param", "value"});
  for (int c = 0; c < draws.n_chains(); ++c)
    for (Index it = 0; it < draws.chains[c].rows(); ++it)
      for (std::size_t p = 0; p < draws.names.size(); ++p)
        out.row({std::to_string(c), std::to_string(it + 1), draws.names[p],
                 csv::format_double(draws.chains[c](it, static_cast<Index>(p)))});
}

PosteriorDraws read_draws_csv(const std::string& path) {
  const auto table = csv::read(path);
  const int cc = table.require("chain", path), ci = table.require("iter", path);
  const int cp = table.require("param", path), cv = table.require("value", path);
  PosteriorDraws out;
  std::map<std::string, int> index;
  int n_chains = 0, n_iter = 0;
  for (const auto& row : table.rows) {
    if (index.try_emplace(row[cp], static_cast<int>(out.names.size())).second) out.names.push_back(row[cp]);
    n_chains = std::max(n_chains, static_cast<int>(csv::parse_int(row[cc], path)) + 1);
    n_iter = std::max(n_iter, static_cast<int>(csv::parse_int(row[ci], path)));
  }
  if (n_chains == 0 || n_iter == 0) throw SchemaError(path + ": no draws");
  out.chains.assign(n_chains, Matrix::Constant(n_iter, static_cast<Index>(out.names.size()),
                                               std::numeric_limits<double>::quiet_NaN()));
  for (const auto& row : table.rows) {
    const auto c = csv::parse_int(row[cc], path);
    const auto it = csv::parse_int(row[ci], path);
    if (c < 0 || it < 1) throw SchemaError(path + ": bad chain or iteration index");
    out.chains[c](it - 1, index[row[cp]]) = csv::parse_double(row[cv], path);
  }
  for (const auto& m : out.chains)
    if (!m.allFinite()) throw SchemaError(path + ": ragged or non-finite draws");
  static const std::regex beta_re(R"(B\[(\d+)\]\[(\d+)\])");
  static const std::regex b_re(R"(b\[(\d+)\])");
  std::smatch match;
  for (const auto& name : out.names) {
    if (std::regex_match(name, match, beta_re)) {
      out.n_covariates = std::max(out.n_covariates, std::stoi(match[1]) + 1);
      out.n_regions = std::max(out.n_regions, std::stoi(match[2]) + 1);
    } else if (std::regex_match(name, match, b_re)) {
      out.n_subjects = std::max(out.n_subjects, std::stoi(match[1]) + 1);
    }
  }
  for (const char* required : {"sigma", "sigma_b"})
    if (out.index_of(required) < 0) throw SchemaError(path + ": missing parameter " + required);
  out.spatial = out.index_of("tau_u") >= 0 && out.index_of("rho") >= 0;
  out.acceptance.assign(n_chains, {});
  out.summarize();
  return out;
}

void write_summary_json(const std::string& path, const PosteriorDraws& draws) {
  using nlohmann::json;
  json j;
  j["n_chains"] = draws.n_chains();
  j["n_kept_per_chain"] = draws.n_kept();
  json params = json::array();
  for (const auto& s : draws.summaries)
    params.push_back({{"param", s.name},
                      {"mean", s.mean},
                      {"median", s.median},
                      {"sd", s.sd},
                      {"q05", s.q05},
                      {"q95", s.q95},
                      {"rhat", s.rhat},
                      {"ess_bulk", s.ess_bulk}});
  j["parameters"] = params;
  json acc = json::array();
  for (const auto& a : draws.acceptance) {
    json row = {{"sigma", a[0]}, {"sigma_b", a[1]}};
    if (draws.spatial) {
      row["tau_u"] = a[2];
      row["rho"] = a[3];
    }
    acc.push_back(row);
  }
  j["acceptance"] = acc;
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace lsnm
