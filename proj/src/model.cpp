#include "lsnm/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace lsnm {

ModelState ModelState::zeros(int p, int n, int r) {
  ModelState s;
  s.B = Matrix::Zero(p, r);
  s.b = Vector::Zero(n);
  s.u = Matrix::Zero(n, r);
  return s;
}

void ModelState::check(const LongDataset& data) const {
  if (B.rows() != data.n_covariates() || B.cols() != data.n_regions())
    throw DimensionMismatch("B must be p x R (" + std::to_string(data.n_covariates()) + " x " +
                            std::to_string(data.n_regions()) + ")");
  if (b.size() != data.n_subjects()) throw DimensionMismatch("b must have one entry per subject");
  if (u.rows() != data.n_subjects() || u.cols() != data.n_regions()) throw DimensionMismatch("u must be n x R");
  if (!(sigma > 0.0) || !(sigma_b > 0.0) || !(tau_u > 0.0))
    throw ConfigInvalid("scale parameters must be strictly positive");
}

void PriorConfig::check() const {
  if (!(sigma_beta > 0.0) || !(scale_sigma > 0.0) || !(scale_sigma_b > 0.0) || !(scale_tau_u > 0.0) ||
      !(rho_a > 0.0) || !(rho_b > 0.0))
    throw ConfigInvalid("prior hyperparameters must be strictly positive");
}

double half_cauchy_log_density(double x, double scale) {
  const double z = x / scale;
  return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(z * z);
}

double obs_mean(const LongDataset& data, const ModelState& state, int k) {
  const int v = data.obs_visit[k];
  const int r = data.obs_region[k];
  const int i = data.visit_subject[v];
  return data.X.row(v).dot(state.B.col(r)) + state.b[i] + state.u(i, r);
}

double log_likelihood(const LongDataset& data, const ModelState& state) {
  state.check(data);
  const double var = state.sigma * state.sigma;
  double ll = 0.0;
  for (int k = 0; k < data.n_obs(); ++k) ll += normal_log_density(data.y[k], obs_mean(data, state, k), var);
  return ll;
}

double marginal_covariance(const LongDataset& data, const RegionGraph& graph, const ModelState& state, int obs_a,
                           int obs_b) {
  if (obs_a < 0 || obs_a >= data.n_obs() || obs_b < 0 || obs_b >= data.n_obs())
    throw DimensionMismatch("observation index out of range");
  if (data.obs_subject(obs_a) != data.obs_subject(obs_b)) return 0.0;
  const int r = data.obs_region[obs_a];
  const int l = data.obs_region[obs_b];
  const auto llt = graph.factorize(state.rho);
  Vector e = Vector::Zero(graph.n_regions());
  e[l] = 1.0;
  const double q_inv_rl = llt.solve(e)[r];
  double cov = state.sigma_b * state.sigma_b + state.tau_u * state.tau_u * q_inv_rl;
  if (obs_a == obs_b) cov += state.sigma * state.sigma;
  return cov;
}

GaussianMoments<double> posterior_u(const Matrix& q, double sigma, double tau_u, const Vector& resid_sum,
                                    const Vector& counts) {
  if (q.rows() != resid_sum.size() || counts.size() != resid_sum.size())
    throw DimensionMismatch("posterior_u: dimensions disagree");
  const double prec = 1.0 / (sigma * sigma);
  Matrix p = q / (tau_u * tau_u);
  p.diagonal() += prec * counts;
  return canonical_to_moments(p, prec * resid_sum);
}

GaussianMoments<double> posterior_u(const LongDataset& data, int subject, const RegionGraph& graph,
                                    const ModelState& state) {
  const int r = data.n_regions();
  Vector sums = Vector::Zero(r);
  Vector counts = Vector::Zero(r);
  for (int v : data.subject_visits[subject]) {
    for (int k : data.visit_obs[v]) {
      const int reg = data.obs_region[k];
      sums[reg] += data.y[k] - data.X.row(v).dot(state.B.col(reg)) - state.b[subject];
      counts[reg] += 1.0;
    }
  }
  return posterior_u(graph.precision(state.rho), state.sigma, state.tau_u, sums, counts);
}

GaussianMoments<double> posterior_predictive(const GaussianMoments<double>& u_posterior, const Matrix& B,
                                             double b_i, double sigma, const Vector& x_new) {
  if (x_new.size() != B.rows() || u_posterior.mean.size() != B.cols() || u_posterior.cov.rows() != B.cols())
    throw DimensionMismatch("posterior_predictive: dimensions disagree");
  GaussianMoments<double> out;
  out.mean = B.transpose() * x_new + Vector::Constant(B.cols(), b_i) + u_posterior.mean;
  out.cov = u_posterior.cov;
  out.cov.diagonal().array() += sigma * sigma;
  return out;
}

ScoreMode parse_score_mode(const std::string& s) {
  if (s == "conditional") return ScoreMode::conditional;
  if (s == "marginal") return ScoreMode::marginal;
  throw ConfigInvalid("score mode must be one of {conditional, marginal}, got '" + s + "'");
}

std::string to_string(ScoreMode m) { return m == ScoreMode::conditional ? "conditional" : "marginal"; }

Vector z_scores(const Vector& y, const Vector& mu_hat, const Vector& v_hat) {
  if (y.size() != mu_hat.size() || y.size() != v_hat.size()) throw DimensionMismatch("z_scores: length mismatch");
  if (v_hat.size() > 0 && !(v_hat.minCoeff() > 0.0)) throw NonpositiveVariance("predictive variance must be > 0");
  return (y - mu_hat).array() / v_hat.array().sqrt();
}

double burden_index(const Vector& subject_z, int m) {
  const int n = static_cast<int>(subject_z.size());
  if (m < 1 || m > n)
    throw MTooLarge("burden index needs 1 <= m <= " + std::to_string(n) + ", got m = " + std::to_string(m));
  std::vector<double> a(subject_z.data(), subject_z.data() + n);
  for (double& x : a) x = std::abs(x);
  std::partial_sort(a.begin(), a.begin() + m, a.end(), std::greater<>());
  double s = 0.0;
  for (int k = 0; k < m; ++k) s += a[k];
  return s / m;
}

int default_burden_m(int n_scores) {
  return std::max(1, static_cast<int>(std::ceil(0.1 * n_scores - 1e-12)));
}

void fill_burden(const LongDataset& data, DeviationReport& report, std::optional<int> m) {
  report.burden = Vector::Constant(data.n_subjects(), std::nan(""));
  report.burden_m.assign(data.n_subjects(), 0);
  for (int i = 0; i < data.n_subjects(); ++i) {
    std::vector<double> zs;
    for (int v : data.subject_visits[i])
      for (int k : data.visit_obs[v]) zs.push_back(report.z[k]);
    if (zs.empty()) continue;
    const Vector zi = Eigen::Map<Vector>(zs.data(), static_cast<Index>(zs.size()));
    const int mi = m ? *m : default_burden_m(static_cast<int>(zs.size()));
    report.burden[i] = burden_index(zi, mi);
    report.burden_m[i] = mi;
  }
}

namespace {

// Visits `fn(k, draw, mean, var)` with the predictive moments of every
// observation under every draw.
template <typename Fn>
void for_each_predictive(const LongDataset& data, const RegionGraph& graph, const std::vector<GlobalParams>& draws,
                         ScoreMode mode, Fn&& fn) {
  const int r = data.n_regions();
  const int dim = r + 1;
  if (graph.n_regions() != r) throw DimensionMismatch("graph and dataset disagree on region count");
  for (std::size_t s = 0; s < draws.size(); ++s) {
    const GlobalParams& g = draws[s];
    if (g.B.rows() != data.n_covariates() || g.B.cols() != r) throw IncompatibleFit("coefficient matrix shape");
    const double prec = 1.0 / (g.sigma * g.sigma);
    Matrix p0 = Matrix::Zero(dim, dim);
    p0(0, 0) = 1.0 / (g.sigma_b * g.sigma_b);
    p0.bottomRightCorner(r, r) = graph.precision(g.rho) / (g.tau_u * g.tau_u);
    const Matrix xb = data.X * g.B;  // visits x R

    if (mode == ScoreMode::marginal) {
      const Matrix prior_cov = spd_factor(p0).solve(Matrix::Identity(dim, dim));
      for (int k = 0; k < data.n_obs(); ++k) {
        const int rr = data.obs_region[k] + 1;
        const double var = g.sigma * g.sigma + prior_cov(0, 0) + 2.0 * prior_cov(0, rr) + prior_cov(rr, rr);
        fn(k, static_cast<int>(s), xb(data.obs_visit[k], rr - 1), var);
      }
      continue;
    }

    Matrix p_full(dim, dim), p(dim, dim), cov(dim, dim);
    Vector h_full(dim), h(dim), mu(dim);
    for (int i = 0; i < data.n_subjects(); ++i) {
      p_full = p0;
      h_full.setZero();
      for (int v : data.subject_visits[i]) {
        for (int k : data.visit_obs[v]) {
          const int rr = data.obs_region[k] + 1;
          const double e = data.y[k] - xb(v, rr - 1);
          p_full(0, 0) += prec;
          p_full(0, rr) += prec;
          p_full(rr, 0) += prec;
          p_full(rr, rr) += prec;
          h_full[0] += prec * e;
          h_full[rr] += prec * e;
        }
      }
      for (int v : data.subject_visits[i]) {
        p = p_full;
        h = h_full;
        for (int k : data.visit_obs[v]) {
          const int rr = data.obs_region[k] + 1;
          const double e = data.y[k] - xb(v, rr - 1);
          p(0, 0) -= prec;
          p(0, rr) -= prec;
          p(rr, 0) -= prec;
          p(rr, rr) -= prec;
          h[0] -= prec * e;
          h[rr] -= prec * e;
        }
        const auto llt = spd_factor(p);
        cov = llt.solve(Matrix::Identity(dim, dim));
        mu = cov * h;
        for (int k : data.visit_obs[v]) {
          const int rr = data.obs_region[k] + 1;
          const double mean = xb(v, rr - 1) + mu[0] + mu[rr];
          const double var = g.sigma * g.sigma + cov(0, 0) + 2.0 * cov(0, rr) + cov(rr, rr);
          fn(k, static_cast<int>(s), mean, var);
        }
      }
    }
  }
}

}  // namespace

PredictiveMoments spatial_predictive(const LongDataset& data, const RegionGraph& graph,
                                     const std::vector<GlobalParams>& draws, ScoreMode mode) {
  if (draws.empty()) throw TooFewDraws("predictive moments need at least one parameter draw");
  const int n = data.n_obs();
  Vector sum_mean = Vector::Zero(n), sum_mean2 = Vector::Zero(n), sum_var = Vector::Zero(n);
  for_each_predictive(data, graph, draws, mode, [&](int k, int, double mean, double var) {
    sum_mean[k] += mean;
    sum_mean2[k] += mean * mean;
    sum_var[k] += var;
  });
  const double s = static_cast<double>(draws.size());
  PredictiveMoments out;
  out.mean = sum_mean / s;
  out.var = sum_var / s + (sum_mean2 / s - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0);
  return out;
}

void spatial_predictive_by_draw(const LongDataset& data, const RegionGraph& graph,
                                const std::vector<GlobalParams>& draws, ScoreMode mode, Matrix& means,
                                Matrix& vars) {
  means.resize(data.n_obs(), static_cast<Index>(draws.size()));
  vars.resize(data.n_obs(), static_cast<Index>(draws.size()));
  for_each_predictive(data, graph, draws, mode, [&](int k, int s, double mean, double var) {
    means(k, s) = mean;
    vars(k, s) = var;
  });
}

void spatial_deviation_maps(const LongDataset& data, const RegionGraph& graph, const std::vector<GlobalParams>& draws,
                            Matrix& u_mean, Matrix& u_sd) {
  if (draws.empty()) throw TooFewDraws("deviation maps need at least one parameter draw");
  const int n = data.n_subjects();
  const int r = data.n_regions();
  const int dim = r + 1;
  Matrix sum_m = Matrix::Zero(n, r), sum_m2 = Matrix::Zero(n, r), sum_v = Matrix::Zero(n, r);
  for (const GlobalParams& g : draws) {
    const double prec = 1.0 / (g.sigma * g.sigma);
    Matrix p0 = Matrix::Zero(dim, dim);
    p0(0, 0) = 1.0 / (g.sigma_b * g.sigma_b);
    p0.bottomRightCorner(r, r) = graph.precision(g.rho) / (g.tau_u * g.tau_u);
    const Matrix xb = data.X * g.B;
    for (int i = 0; i < n; ++i) {
      Matrix p = p0;
      Vector h = Vector::Zero(dim);
      for (int v : data.subject_visits[i]) {
        for (int k : data.visit_obs[v]) {
          const int rr = data.obs_region[k] + 1;
          const double e = data.y[k] - xb(v, rr - 1);
          p(0, 0) += prec;
          p(0, rr) += prec;
          p(rr, 0) += prec;
          p(rr, rr) += prec;
          h[0] += prec * e;
          h[rr] += prec * e;
        }
      }
      const auto llt = spd_factor(p);
      const Vector mu = llt.solve(h);
      const Matrix cov = llt.solve(Matrix::Identity(dim, dim));
      for (int c = 0; c < r; ++c) {
        sum_m(i, c) += mu[c + 1];
        sum_m2(i, c) += mu[c + 1] * mu[c + 1];
        sum_v(i, c) += cov(c + 1, c + 1);
      }
    }
  }
  const double s = static_cast<double>(draws.size());
  u_mean = sum_m / s;
  const Matrix var = sum_v / s + (sum_m2 / s - u_mean.cwiseProduct(u_mean)).cwiseMax(0.0);
  u_sd = var.cwiseSqrt();
}

}  // namespace lsnm
