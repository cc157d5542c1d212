#pragma once

// Dense Gaussian kernels shared by the model, the sampler and the simulator.
// Everything here is a free function over Eigen expressions, templated on the
// scalar type of the argument.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "lsnm/errors.hpp"

namespace lsnm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

template <typename Scalar>
struct GaussianMoments {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cov;
};

/// Seeded random stream; one per chain / replicate / thread.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gaussian_vector(Index n) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z(n);
    for (Index i = 0; i < n; ++i) z[i] = static_cast<Scalar>(normal_(engine_));
    return z;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finalizer; derives independent stream seeds from (master, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Cholesky factor of a symmetric positive-definite matrix; throws if any pivot is nonpositive.
template <typename Derived>
Eigen::LLT<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>> spd_factor(
    const Eigen::MatrixBase<Derived>& a) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::LLT<M> llt(a.derived());
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("matrix is not positive definite");
  return llt;
}

template <typename Scalar>
Scalar llt_log_det(const Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& llt) {
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

/// log|A| for symmetric positive-definite A via its Cholesky factor.
template <typename Derived>
typename Derived::Scalar log_det_spd(const Eigen::MatrixBase<Derived>& a) {
  return llt_log_det(spd_factor(a));
}

/// Moments of N(P^{-1} h, P^{-1}) from canonical parameters (precision P, linear term h).
template <typename DerivedP, typename DerivedH>
GaussianMoments<typename DerivedP::Scalar> canonical_to_moments(const Eigen::MatrixBase<DerivedP>& precision,
                                                                const Eigen::MatrixBase<DerivedH>& linear) {
  using Scalar = typename DerivedP::Scalar;
  auto llt = spd_factor(precision);
  GaussianMoments<Scalar> out;
  out.mean = llt.solve(linear.derived());
  out.cov = llt.solve(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(precision.rows(),
                                                                                    precision.cols()));
  return out;
}

/// Draw from N(P^{-1} h, P^{-1}) given the Cholesky factor of P.
template <typename Scalar, typename DerivedH>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_canonical(
    const Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& llt,
    const Eigen::MatrixBase<DerivedH>& linear, RandomStream& rng) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = llt.solve(linear.derived());
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = rng.gaussian_vector<Scalar>(linear.size());
  return mean + llt.matrixU().solve(z);
}

template <typename Scalar>
Scalar normal_log_density(Scalar x, Scalar mean, Scalar variance) {
  const Scalar d = x - mean;
  return Scalar(-0.5) * (std::log(Scalar(2) * std::numbers::pi_v<Scalar> * variance) + d * d / variance);
}

}  // namespace lsnm
