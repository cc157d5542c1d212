#pragma once

// Toy fixtures and dense reference computations. The oracles here only use
// explicit inverses, LU solves and eigen-decompositions, never the library's
// canonical-form kernels.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsnm/dataset.hpp"
#include "lsnm/model.hpp"
#include "lsnm/region_graph.hpp"

namespace lsnm::test {

inline Matrix path_adjacency(int n) {
  Matrix w = Matrix::Zero(n, n);
  for (int r = 0; r + 1 < n; ++r) w(r, r + 1) = w(r + 1, r) = 1.0;
  return w;
}

inline Matrix cycle_adjacency(int n) {
  Matrix w = path_adjacency(n);
  w(0, n - 1) = w(n - 1, 0) = 1.0;
  return w;
}

inline Matrix dense_inverse(const Matrix& a) { return a.fullPivLu().inverse(); }

/// Dense inverse of D - rho W + ridge I, built entry by entry.
inline Matrix car_covariance(const Matrix& w, double rho, double ridge = 0.0) {
  const Index n = w.rows();
  Matrix q(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) q(a, b) = a == b ? w.row(a).sum() + ridge : -rho * w(a, b);
  return dense_inverse(q);
}

/// Moments of x_free | x_obs = values for x ~ N(mean, cov), by explicit inversion.
inline GaussianMoments<double> condition(const Vector& mean, const Matrix& cov, const std::vector<int>& free,
                                         const std::vector<int>& obs, const Vector& values) {
  const auto nf = static_cast<Index>(free.size()), no = static_cast<Index>(obs.size());
  Matrix s_ff(nf, nf), s_fo(nf, no), s_oo(no, no);
  Vector m_f(nf), m_o(no);
  for (Index a = 0; a < nf; ++a) {
    m_f[a] = mean[free[a]];
    for (Index b = 0; b < nf; ++b) s_ff(a, b) = cov(free[a], free[b]);
    for (Index b = 0; b < no; ++b) s_fo(a, b) = cov(free[a], obs[b]);
  }
  for (Index a = 0; a < no; ++a) {
    m_o[a] = mean[obs[a]];
    for (Index b = 0; b < no; ++b) s_oo(a, b) = cov(obs[a], obs[b]);
  }
  const Matrix k = s_fo * dense_inverse(s_oo);
  return {m_f + k * (values - m_o), s_ff - k * s_fo.transpose()};
}

/// log N(x | mean, cov) by explicit inverse and LU determinant.
inline double mvn_log_density(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Vector d = x - mean;
  const double logdet = std::log(cov.fullPivLu().determinant());
  return -0.5 * (x.size() * std::log(2.0 * std::numbers::pi) + logdet + d.dot(dense_inverse(cov) * d));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Kolmogorov-Smirnov distance of a sample from N(0, 1).
inline double ks_normal(std::vector<double> z) {
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double f = normal_cdf(z[k]);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

inline double rel_frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

/// Sample covariance of draws stored one per row.
inline Matrix sample_covariance(const Matrix& rows) {
  const Matrix c = rows.rowwise() - rows.colwise().mean();
  return c.transpose() * c / static_cast<double>(rows.rows() - 1);
}

/// One subject per entry of `visits`; every visit covers all regions unless
/// `drop(i, t, r)` says otherwise. Covariates are (intercept, age), responses N(0, 1).
template <typename Drop>
LongDataset toy_dataset(const std::vector<int>& visits, int n_regions, RandomStream& rng, Drop drop) {
  LongDataset d;
  for (int r = 0; r < n_regions; ++r) d.region_labels.push_back("r" + std::to_string(r + 1));
  d.raw_covariate_names = {"age"};
  std::vector<double> ys;
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const int subject = static_cast<int>(i);
    d.subject_ids.push_back("s" + std::to_string(i + 1));
    d.reference_flag.push_back(0);
    const double age0 = 60.0 + 25.0 * rng.uniform();
    for (int t = 1; t <= visits[i]; ++t) {
      const int v = d.n_visits();
      d.visit_subject.push_back(subject);
      d.visit_number.push_back(t);
      std::ostringstream age;
      age << age0 + 1.5 * (t - 1);
      d.raw_covariates.push_back({age.str()});
      for (int r = 0; r < n_regions; ++r) {
        if (drop(subject, t, r)) continue;
        d.obs_visit.push_back(v);
        d.obs_region.push_back(r);
        ys.push_back(rng.gaussian());
      }
    }
  }
  d.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
  build_design(d);
  d.build_index();
  d.validate();
  return d;
}

inline LongDataset toy_dataset(const std::vector<int>& visits, int n_regions, RandomStream& rng) {
  return toy_dataset(visits, n_regions, rng, [](int, int, int) { return false; });
}

/// Drop every raw covariate, leaving the intercept as the only design column.
inline void intercept_only(LongDataset& d) {
  d.raw_covariate_names.clear();
  for (auto& row : d.raw_covariates) row.clear();
  build_design(d);
}

/// Dense marginal covariance of every observation: sigma_b^2 + tau^2 [Q^-1]_rl within a
/// subject, plus sigma^2 on the diagonal.
inline Matrix dense_marginal_covariance(const LongDataset& d, const Matrix& q_inv, double sigma, double sigma_b,
                                        double tau) {
  const int n = d.n_obs();
  Matrix c = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (d.obs_subject(a) != d.obs_subject(b)) continue;
      c(a, b) = sigma_b * sigma_b + tau * tau * q_inv(d.obs_region[a], d.obs_region[b]);
      if (a == b) c(a, b) += sigma * sigma;
    }
  return c;
}

/// Moments of [b_i; u_i] given subject i's data, by conditioning the dense joint of [b_i; u_i; y_i].
inline GaussianMoments<double> latent_posterior_oracle(const LongDataset& d, int subject, const Matrix& B,
                                                       const Matrix& q_inv, double sigma, double sigma_b,
                                                       double tau) {
  const int R = d.n_regions();
  std::vector<int> ks;
  for (int k = 0; k < d.n_obs(); ++k)
    if (d.obs_subject(k) == subject) ks.push_back(k);
  const int n = static_cast<int>(ks.size()), dim = 1 + R + n;
  Matrix joint = Matrix::Zero(dim, dim);
  Vector mean = Vector::Zero(dim), vals(n);
  joint(0, 0) = sigma_b * sigma_b;
  joint.block(1, 1, R, R) = tau * tau * q_inv;
  for (int a = 0; a < n; ++a) {
    const int ka = ks[a], ra = d.obs_region[ka];
    vals[a] = d.y[ka];
    mean[1 + R + a] = d.X.row(d.obs_visit[ka]).dot(B.col(ra));
    joint(0, 1 + R + a) = joint(1 + R + a, 0) = sigma_b * sigma_b;
    for (int r = 0; r < R; ++r) joint(1 + r, 1 + R + a) = joint(1 + R + a, 1 + r) = tau * tau * q_inv(r, ra);
    for (int c = 0; c < n; ++c)
      joint(1 + R + a, 1 + R + c) =
          sigma_b * sigma_b + tau * tau * q_inv(ra, d.obs_region[ks[c]]) + (a == c ? sigma * sigma : 0.0);
  }
  std::vector<int> free, obs;
  for (int r = 0; r <= R; ++r) free.push_back(r);
  for (int a = 0; a < n; ++a) obs.push_back(1 + R + a);
  return condition(mean, joint, free, obs, vals);
}

/// Design of vec(B) (covariates fastest, then regions) for every observation.
inline Matrix stacked_design(const LongDataset& d) {
  const int p = d.n_covariates();
  Matrix z = Matrix::Zero(d.n_obs(), p * d.n_regions());
  for (int k = 0; k < d.n_obs(); ++k) z.block(k, d.obs_region[k] * p, 1, p) = d.X.row(d.obs_visit[k]);
  return z;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("lsnm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace lsnm::test
