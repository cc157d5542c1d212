#include <doctest.h>

#include <algorithm>
#include <random>

#include "lsnm/evaluation.hpp"
#include "support.hpp"

using namespace lsnm;
using namespace lsnm::test;

namespace {

// Pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(const Vector& s, const std::vector<int>& lab) {
  double wins = 0.0, pairs = 0.0;
  for (Index a = 0; a < s.size(); ++a)
    for (Index b = 0; b < s.size(); ++b)
      if (lab[a] && !lab[b]) {
        pairs += 1.0;
        wins += s[a] > s[b] ? 1.0 : s[a] == s[b] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

MetricReport report(std::initializer_list<std::pair<std::string, double>> kv) {
  MetricReport r;
  for (const auto& [k, v] : kv) r.set(k, v);
  return r;
}

}  // namespace

TEST_CASE("accuracy metrics") {
  const Vector mu = Vector::LinSpaced(5, 0.0, 4.0);
  const Matrix u = Matrix::Ones(2, 3);
  const AccuracyMetrics zero = accuracy_metrics(mu, mu, u, u);
  CHECK(zero.bias == 0.0);
  CHECK(zero.mse == 0.0);
  CHECK(zero.map_mse == 0.0);

  const AccuracyMetrics shifted = accuracy_metrics(mu.array() + 0.5, mu, u.array() + 2.0, u);
  CHECK(shifted.bias == doctest::Approx(0.5));
  CHECK(shifted.mse == doctest::Approx(0.25));
  CHECK(shifted.map_mse == doctest::Approx(4.0));

  Matrix one = Matrix::Zero(2, 3);
  one(1, 2) = 3.0;
  CHECK(accuracy_metrics(mu, mu, one, Matrix::Zero(2, 3)).map_mse == doctest::Approx(9.0 / 6.0));
  CHECK_THROWS_AS(accuracy_metrics(mu, mu.head(3), u, u), AlignmentError);
  CHECK_THROWS_AS(accuracy_metrics(mu, mu, u, Matrix::Ones(3, 2)), AlignmentError);
}

TEST_CASE("calibration metrics") {
  const CalibrationMetrics c0 = calibration_metrics(Vector::Zero(10));
  CHECK(c0.z_mean == 0.0);
  CHECK(c0.z_var == 0.0);
  CHECK(c0.tail_prob == 0.0);

  Vector z(4);
  z << -3.0, -1.0, 1.0, 3.0;
  const CalibrationMetrics c = calibration_metrics(z);
  CHECK(c.z_var == doctest::Approx(20.0 / 3.0));
  CHECK(c.tail_prob == 0.5);
  CHECK(calibration_metrics(z, 3.0).tail_prob == 0.0);  // strict inequality

  RandomStream rng(1);
  Vector g(1000000);
  for (Index k = 0; k < g.size(); ++k) g[k] = rng.gaussian();
  const CalibrationMetrics n = calibration_metrics(g);
  CHECK(std::abs(n.z_mean) < 0.005);
  CHECK(n.z_var == doctest::Approx(1.0).epsilon(0.005));
  CHECK(n.tail_prob == doctest::Approx(0.05).epsilon(0.03));
  CHECK_THROWS_AS(calibration_metrics(Vector::Zero(1)), TooFewScores);
}

TEST_CASE("rank AUC against the pairwise definition") {
  RandomStream rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 5 + rep;
    Vector s(n);
    std::vector<int> lab(n);
    for (int k = 0; k < n; ++k) {
      s[k] = std::round(4.0 * rng.gaussian()) / 2.0;  // plenty of ties
      lab[k] = rng.uniform() < 0.4;
    }
    lab[0] = 1;
    lab[1] = 0;
    CHECK(rank_auc(s, lab) == doctest::Approx(pairwise_auc(s, lab)).epsilon(1e-12));
  }
}

TEST_CASE("AUC edge cases") {
  Vector s(6);
  s << 0.1, 0.2, 0.3, 0.7, 0.8, 0.9;
  const std::vector<int> lab{0, 0, 0, 1, 1, 1};
  CHECK(rank_auc(s, lab) == 1.0);
  CHECK(rank_auc(-s, lab) == 0.0);
  CHECK(rank_auc(Vector::Constant(6, 2.0), lab) == 0.5);
  // strictly increasing transforms leave the AUC unchanged
  CHECK(rank_auc(s.array().exp().matrix(), lab) == rank_auc(s, lab));
  CHECK_THROWS_AS(rank_auc(s, std::vector<int>(6, 1)), DegenerateLabels);
  CHECK_THROWS_AS(rank_auc(s, std::vector<int>(5, 1)), AlignmentError);

  RandomStream rng(3);
  const int n = 20000;
  Vector r(n);
  std::vector<int> l(n);
  for (int k = 0; k < n; ++k) {
    r[k] = rng.gaussian();
    l[k] = rng.uniform() < 0.3;
  }
  CHECK(std::abs(rank_auc(r, l) - 0.5) < 0.015);
}

TEST_CASE("detection metrics") {
  Vector s(8);
  s << 3.0, -2.5, 0.5, 2.1, 0.0, -0.1, 2.2, 1.0;
  const std::vector<int> lab{1, 1, 1, 0, 0, 0, 0, 0};
  const DetectionMetrics d = detection_metrics(s, lab);
  CHECK(d.sensitivity == doctest::Approx(2.0 / 3.0));
  CHECK(d.specificity == doctest::Approx(3.0 / 5.0));
  CHECK(d.ppv == doctest::Approx(2.0 / 4.0));
  CHECK(d.auc == doctest::Approx(pairwise_auc(s.cwiseAbs(), lab)));

  const DetectionMetrics none = detection_metrics(s, lab, std::numeric_limits<double>::infinity());
  CHECK(none.sensitivity == 0.0);
  CHECK(none.specificity == 1.0);
  CHECK(std::isnan(none.ppv));
  CHECK_THROWS_AS(detection_metrics(s, std::vector<int>(8, 0)), DegenerateLabels);
}

TEST_CASE("residual metrics and msll") {
  Vector y(4), mu(4);
  y << 1.0, 2.0, 3.0, 4.0;
  mu << 1.0, 2.0, 3.0, 6.0;
  const ResidualMetrics r = residual_metrics(y, mu);
  CHECK(r.mae == doctest::Approx(0.5));
  CHECK(r.rmse == doctest::Approx(1.0));
  CHECK(r.residual_sd == doctest::Approx(1.0));

  const double var = 5.0 / 3.0;
  CHECK(msll(y, Vector::Constant(4, 2.5), Vector::Constant(4, var)) == doctest::Approx(0.0).epsilon(1e-12));
  // hand-computed: a perfect mean with unit variance
  double expect = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double d = y[k] - 2.5;
    expect += 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(2.0 * std::numbers::pi * var) -
              0.5 * d * d / var;
  }
  CHECK(msll(y, y, Vector::Ones(4)) == doctest::Approx(expect / 4.0).epsilon(1e-12));
  CHECK_THROWS_AS(msll(y.head(1), y.head(1), y.head(1)), TooFewScores);
}

TEST_CASE("region tail table") {
  RandomStream rng(4);
  LongDataset d = toy_dataset({2, 1}, 2, rng);
  Vector z(d.n_obs());
  for (int k = 0; k < d.n_obs(); ++k) z[k] = d.obs_region[k] == 0 ? 3.0 * (k % 2 ? 1 : -1) : 0.5;
  const auto rows = region_tail_table(d, z);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].region == "r1");
  CHECK(rows[0].n == 3);
  CHECK(rows[0].tail_prob == 1.0);
  CHECK(rows[1].tail_prob == 0.0);
  CHECK(rows[1].mean_z == 0.5);
  CHECK(rows[1].sd_z == 0.0);

  std::vector<char> only(d.n_obs(), 0);
  only[0] = 1;
  const auto part = region_tail_table(d, z, only);
  CHECK(part[0].n == 1);
  CHECK(part[1].n == 0);
  CHECK_THROWS_AS(region_tail_table(d, z.head(2)), AlignmentError);

  const auto dir = scratch_dir("tail");
  write_region_tail_csv((dir / "t.csv").string(), rows);
  CHECK(slurp(dir / "t.csv").rfind("region,n,mean_z,sd_z,tail_prob\nr1,3,", 0) == 0);
}

TEST_CASE("metric reports") {
  MetricReport r;
  r.set("a", 1.0);
  r.set("b", 2.0);
  r.set("a", 3.0);
  CHECK(r.values.size() == 2);
  CHECK(r.values.front().first == "a");
  CHECK(r.get("a") == 3.0);
  CHECK(r.has("b"));
  CHECK_FALSE(r.has("c"));
  CHECK_THROWS_AS(r.get("c"), ConfigInvalid);
}

TEST_CASE("Monte Carlo summary") {
  SUBCASE("identical replicates have zero standard error") {
    const auto s = monte_carlo_summary(std::vector<MetricReport>(5, report({{"mse", 0.3}})));
    CHECK(s.at("mse").mean == doctest::Approx(0.3));
    CHECK(s.at("mse").se == 0.0);
    CHECK(s.at("mse").n == 5);
  }
  SUBCASE("two replicates") {
    const auto s = monte_carlo_summary({report({{"x", 1.0}}), report({{"x", 4.0}})});
    CHECK(s.at("x").mean == 2.5);
    CHECK(s.at("x").se == doctest::Approx(1.5));  // sd = 3 / sqrt 2, over sqrt 2
  }
  SUBCASE("non-finite entries are skipped") {
    const auto s = monte_carlo_summary(
        {report({{"x", 1.0}}), report({{"x", std::nan("")}}), report({{"x", 3.0}, {"y", 7.0}})});
    CHECK(s.at("x").n == 2);
    CHECK(s.at("x").mean == 2.0);
    CHECK(s.at("y").n == 1);
    CHECK(std::isnan(s.at("y").se));
  }
  SUBCASE("standard error matches the sampling sd") {
    RandomStream rng(5);
    std::vector<MetricReport> reps;
    for (int m = 0; m < 200; ++m) reps.push_back(report({{"x", 2.0 + 0.5 * rng.gaussian()}}));
    const auto s = monte_carlo_summary(reps).at("x");
    CHECK(s.se == doctest::Approx(0.5 / std::sqrt(200.0)).epsilon(0.15));
    CHECK(std::abs(s.mean - 2.0) < 3.0 * s.se);

    std::mt19937 g(7);
    std::shuffle(reps.begin(), reps.end(), g);
    const auto t = monte_carlo_summary(reps).at("x");
    CHECK(t.mean == s.mean);
    CHECK(t.se == s.se);
  }
}
