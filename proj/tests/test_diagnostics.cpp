#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include "lsnm/diagnostics.hpp"
#include "support.hpp"

using namespace lsnm;
using namespace lsnm::test;

namespace {

Matrix iid(int n, int m, RandomStream& rng, double mean = 0.0) {
  Matrix x(n, m);
  for (Index c = 0; c < m; ++c)
    for (Index t = 0; t < n; ++t) x(t, c) = mean + rng.gaussian();
  return x;
}

Matrix ar1(int n, int m, double phi, RandomStream& rng) {
  Matrix x(n, m);
  const double innov = std::sqrt(1.0 - phi * phi);
  for (Index c = 0; c < m; ++c) {
    double s = rng.gaussian();
    for (Index t = 0; t < n; ++t) {
      s = phi * s + innov * rng.gaussian();
      x(t, c) = s;
    }
  }
  return x;
}

// Textbook potential scale reduction on split halves.
double psrf_oracle(const Matrix& draws) {
  const Index h = draws.rows() / 2, m = 2 * draws.cols();
  std::vector<Vector> chains;
  for (Index c = 0; c < draws.cols(); ++c) {
    chains.push_back(draws.col(c).head(h));
    chains.push_back(draws.col(c).tail(h));
  }
  Vector means(m), vars(m);
  for (Index c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    vars[c] = (chains[c].array() - means[c]).square().sum() / (h - 1.0);
  }
  const double W = vars.mean();
  const double B = h * (means.array() - means.mean()).square().sum() / (m - 1.0);
  return std::sqrt(((h - 1.0) / h * W + B / h) / W);
}

}  // namespace

TEST_CASE("split R-hat matches the textbook formula on raw draws") {
  RandomStream rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix x = ar1(101 + rep, 3, 0.5, rng);
    x.col(1).array() += 0.3 * rep;
    CHECK(split_rhat_raw(x) == doctest::Approx(psrf_oracle(x)).epsilon(1e-12));
  }
}

TEST_CASE("rank normalization") {
  Matrix x(3, 2);
  x << 5.0, 1.0, 2.0, 5.0, -1.0, 3.0;
  const Matrix z = rank_normalize(x);
  const boost::math::normal_distribution<double> nd;
  // ranks: -1 -> 1, 1 -> 2, 2 -> 3, 3 -> 4, 5 and 5 -> 5.5
  CHECK(z(2, 0) == doctest::Approx(boost::math::quantile(nd, (1 - 0.375) / 6.25)));
  CHECK(z(0, 0) == doctest::Approx(boost::math::quantile(nd, (5.5 - 0.375) / 6.25)));
  CHECK(z(0, 0) == z(1, 1));
  CHECK(z(2, 1) == doctest::Approx(boost::math::quantile(nd, (4 - 0.375) / 6.25)));
}

TEST_CASE("R-hat on well-mixed and separated chains") {
  RandomStream rng(2);
  CHECK(split_rhat(Matrix::Constant(50, 4, 3.0)) == 1.0);
  CHECK(std::abs(split_rhat(iid(1000, 4, rng)) - 1.0) < 0.01);

  Matrix sep = iid(500, 2, rng);
  sep.col(1).array() += 10.0;
  CHECK(split_rhat(sep) > 1.2);

  // one chain drifting across its run
  Matrix drift = iid(500, 4, rng);
  drift.col(0) += Vector::LinSpaced(500, 0.0, 6.0);
  CHECK(split_rhat(drift) > 1.05);

  const Matrix one = iid(200, 1, rng);
  Matrix same(200, 4);
  for (int c = 0; c < 4; ++c) same.col(c) = one;
  CHECK(std::abs(split_rhat(same) - 1.0) < 0.01);

  CHECK_THROWS_AS(split_rhat(iid(100, 1, rng)), TooFewDraws);
  CHECK_THROWS_AS(split_rhat(iid(3, 4, rng)), TooFewDraws);
}

TEST_CASE("bulk ESS of independent and autocorrelated chains") {
  RandomStream rng(3);
  const double iid_ess = bulk_ess(iid(2500, 4, rng));
  CHECK(iid_ess == doctest::Approx(10000.0).epsilon(0.1));

  const double phi = 0.9;
  const double expect = 20000.0 * (1.0 - phi) / (1.0 + phi);
  CHECK(bulk_ess(ar1(5000, 4, phi, rng)) == doctest::Approx(expect).epsilon(0.2));
  CHECK(ess_raw(ar1(5000, 4, phi, rng)) == doctest::Approx(expect).epsilon(0.2));

  CHECK(bulk_ess(Matrix::Constant(100, 2, -1.0)) == 1.0);

  // antithetic chains would exceed the draw count without the cap
  Matrix alt(1000, 2);
  for (Index t = 0; t < 1000; ++t) alt(t, 0) = alt(t, 1) = (t % 2 ? 1.0 : -1.0) * (1.0 + 0.01 * rng.uniform());
  CHECK(bulk_ess(alt) <= 2000.0);
  CHECK(ess_raw(ar1(400, 3, -0.8, rng)) <= 1200.0);
  CHECK(bulk_ess(iid(10, 1, rng)) > 0.0);
}

TEST_CASE("diagnostics are invariant to chain order and affine maps") {
  RandomStream rng(4);
  Matrix x = ar1(400, 4, 0.6, rng);
  x.col(2).array() += 0.4;
  Matrix perm(x.rows(), 4);
  perm << x.col(3), x.col(1), x.col(0), x.col(2);
  CHECK(split_rhat(perm) == doctest::Approx(split_rhat(x)).epsilon(1e-12));
  CHECK(bulk_ess(perm) == doctest::Approx(bulk_ess(x)).epsilon(1e-12));

  const Matrix y = (3.0 * x.array() - 7.0).matrix();
  CHECK(split_rhat_raw(y) == doctest::Approx(split_rhat_raw(x)).epsilon(1e-10));
  CHECK(ess_raw(y) == doctest::Approx(ess_raw(x)).epsilon(1e-10));
  // ranks survive any increasing map
  const Matrix e = x.array().exp().matrix();
  CHECK(split_rhat(e) == doctest::Approx(split_rhat(x)).epsilon(1e-12));
  CHECK(bulk_ess(e) == doctest::Approx(bulk_ess(x)).epsilon(1e-12));
}

TEST_CASE("posterior predictive checks") {
  RandomStream rng(5);
  const int n = 2000, s = 200;
  Matrix means(n, s), vars(n, s);
  for (int k = 0; k < n; ++k)
    for (int d = 0; d < s; ++d) {
      means(k, d) = 0.01 * k + 0.2 * rng.gaussian();
      vars(k, d) = 1.0;
    }
  // y drawn from the same predictive mixture
  Vector y(n);
  for (int k = 0; k < n; ++k) {
    const int d = static_cast<int>(rng.uniform() * s);
    y[k] = means(k, d) + rng.gaussian();
  }

  SUBCASE("z histogram sits in the replicate envelope") {
    const PpcTable t = posterior_predictive_check(y, means, vars, PpcStatistic::z_hist, rng);
    CHECK(t.rows.size() == 18);
    CHECK(t.columns.size() == 6);
    CHECK(t.summary >= 0.9);
    double total = 0.0;
    for (const auto& row : t.rows) total += row[2];
    CHECK(total == n);
  }
  SUBCASE("qq quantiles are monotone and agree") {
    const PpcTable t = posterior_predictive_check(y, means, vars, PpcStatistic::qq, rng);
    REQUIRE(t.rows.size() == 99);
    double worst = 0.0;
    for (std::size_t k = 1; k < t.rows.size(); ++k) {
      CHECK(t.rows[k][1] >= t.rows[k - 1][1]);
      CHECK(t.rows[k][2] >= t.rows[k - 1][2]);
    }
    for (std::size_t k = 5; k < 94; ++k) worst = std::max(worst, std::abs(t.rows[k][1] - t.rows[k][2]));
    CHECK(worst < 0.15);
  }
  SUBCASE("observed versus fitted") {
    const Vector fit = means.rowwise().mean();
    const PpcTable t = posterior_predictive_check(fit, means, vars, PpcStatistic::obs_vs_fit, rng);
    CHECK(t.summary == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.rows.size() == static_cast<std::size_t>(n));
  }
  CHECK_THROWS_AS(posterior_predictive_check(y.head(5), means, vars, PpcStatistic::qq, rng), DimensionMismatch);
  CHECK_THROWS_AS(parse_ppc_statistic("density"), ConfigInvalid);
  CHECK(parse_ppc_statistic("obs_vs_fit") == PpcStatistic::obs_vs_fit);
}
