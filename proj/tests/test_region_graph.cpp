#include <doctest.h>

#include "lsnm/region_graph.hpp"
#include "lsnm/simulation.hpp"
#include "support.hpp"

using namespace lsnm;
using namespace lsnm::test;

TEST_CASE("precision of a single edge") {
  RegionGraph g(path_adjacency(2));
  const Matrix q = g.precision(0.5);
  Matrix expect(2, 2);
  expect << 1, -0.5, -0.5, 1;
  CHECK(q == expect);
}

TEST_CASE("precision at rho zero is the degree matrix") {
  RegionGraph g(cycle_adjacency(6) + path_adjacency(6));  // weights up to 2
  const Matrix q = g.precision(0.0);
  CHECK(q.isDiagonal());
  CHECK((q.diagonal() - g.adjacency().rowwise().sum()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("precision equals D - rho W element-wise across the interval") {
  RegionGraph g(path_adjacency(4));
  const Interval iv = g.admissible_interval();
  for (double f : {0.01, 0.2, 0.5, 0.8, 0.99}) {
    const double rho = iv.lo + f * iv.width();
    const Matrix q = g.precision(rho);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const double expect = a == b ? g.adjacency().row(a).sum() : -rho * g.adjacency()(a, b);
        CHECK(q(a, b) == expect);
      }
  }
  const Matrix q = g.precision(0.9);
  Eigen::SelfAdjointEigenSolver<Matrix> es(q);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("admissible interval of a single edge is (-1, 1)") {
  const Interval iv = RegionGraph(path_adjacency(2)).admissible_interval();
  CHECK(iv.lo == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(iv.hi == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bipartite regular graphs give a symmetric interval") {
  for (int n : {4, 6, 8, 10}) {
    const Interval iv = RegionGraph(cycle_adjacency(n)).admissible_interval();
    CHECK(iv.lo == doctest::Approx(-iv.hi).epsilon(1e-10));
  }
}

TEST_CASE("five-cycle interval from circulant eigenvalues") {
  // D^-1/2 W D^-1/2 = W / 2 has eigenvalues cos(2 pi k / 5).
  double lmin = 1.0, lmax = -1.0;
  for (int k = 0; k < 5; ++k) {
    const double lam = std::cos(2.0 * std::numbers::pi * k / 5.0);
    lmin = std::min(lmin, lam);
    lmax = std::max(lmax, lam);
  }
  const Interval iv = RegionGraph(cycle_adjacency(5)).admissible_interval();
  CHECK(iv.lo == doctest::Approx(1.0 / lmin).epsilon(1e-12));
  CHECK(iv.hi == doctest::Approx(1.0 / lmax).epsilon(1e-12));
}

TEST_CASE("positive definite exactly inside the interval") {
  for (const Matrix& w : {path_adjacency(5), cycle_adjacency(7), make_region_graph(12).adjacency()}) {
    RegionGraph g(w);
    const Interval iv = g.admissible_interval();
    for (double rho : {iv.lo * (1 - 1e-6), iv.hi * (1 - 1e-6), 0.0}) CHECK_NOTHROW(g.factorize(rho));
    // just past each end
    Matrix q_hi = -iv.hi * 1.001 * w;
    q_hi.diagonal() = w.rowwise().sum();
    Eigen::SelfAdjointEigenSolver<Matrix> es(q_hi);
    CHECK(es.eigenvalues().minCoeff() <= 0.0);
    CHECK_THROWS_AS(g.precision(iv.hi * 1.001), RhoOutOfRange);
    CHECK_THROWS_AS(g.precision(iv.lo * 1.001), RhoOutOfRange);
    CHECK_THROWS_AS(g.precision(iv.hi), RhoOutOfRange);
  }
}

TEST_CASE("isolated region") {
  Matrix w = path_adjacency(3);
  w(1, 2) = w(2, 1) = 0.0;
  SUBCASE("zero ridge is rejected") {
    RegionGraph g(w, {}, 0.0);
    CHECK_THROWS_AS(g.admissible_interval(), IsolatedRegion);
    CHECK_THROWS_AS(g.precision(0.0), IsolatedRegion);
  }
  SUBCASE("default ridge keeps Q positive definite") {
    RegionGraph g(w);
    CHECK(g.ridge() == doctest::Approx(1e-8));
    const Interval iv = g.admissible_interval();
    CHECK(iv.contains(0.0));
    CHECK_NOTHROW(g.factorize(iv.midpoint()));
    // interval recomputed on ridged degrees
    Vector dr = w.rowwise().sum().array() + g.ridge();
    const Vector s = dr.array().rsqrt();
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.asDiagonal() * w * s.asDiagonal());
    CHECK(iv.hi == doctest::Approx(1.0 / es.eigenvalues().maxCoeff()).epsilon(1e-12));
  }
}

TEST_CASE("malformed adjacency is rejected") {
  Matrix w = path_adjacency(3);
  w(0, 1) = 2.0;
  CHECK_THROWS_AS(RegionGraph{w}, ConfigInvalid);
  Matrix d = path_adjacency(3);
  d(1, 1) = 1.0;
  CHECK_THROWS_AS(RegionGraph{d}, ConfigInvalid);
  Matrix neg = path_adjacency(3);
  neg(0, 1) = neg(1, 0) = -1.0;
  CHECK_THROWS_AS(RegionGraph{neg}, ConfigInvalid);
  CHECK_THROWS_AS(RegionGraph{Matrix::Zero(2, 3)}, DimensionMismatch);
  CHECK_THROWS_AS(RegionGraph{path_adjacency(RegionGraph::max_regions + 1)}, ConfigInvalid);
}

TEST_CASE("degrees are recomputed from weights") {
  Matrix w = path_adjacency(3);
  w(0, 1) = w(1, 0) = 2.5;
  RegionGraph g(w);
  CHECK(g.degree()[0] == 2.5);
  CHECK(g.degree()[1] == 3.5);
  CHECK(g.degree()[2] == 1.0);
}

TEST_CASE("gmrf at rho zero with unit degrees is white noise") {
  RegionGraph g(path_adjacency(2));
  RandomStream rng(3);
  const int n = 100000;
  Matrix draws(n, 2);
  for (int k = 0; k < n; ++k) draws.row(k) = sample_gmrf(g, 0.0, 1.0, rng).transpose();
  const Matrix c = sample_covariance(draws);
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(c(0, 1)) < 0.015);
}

TEST_CASE("gmrf requires a positive scale and shrinks with it") {
  RegionGraph g(path_adjacency(3));
  RandomStream rng(5);
  CHECK_THROWS_AS(sample_gmrf(g, 0.5, 0.0, rng), ConfigInvalid);
  CHECK(sample_gmrf(g, 0.5, 1e-12, rng).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gmrf covariance on a three-region path") {
  RegionGraph g(path_adjacency(3));
  RandomStream rng(11);
  const auto llt = g.factorize(0.8);
  const int n = 200000;
  Matrix draws(n, 3);
  for (int k = 0; k < n; ++k) draws.row(k) = sample_gmrf(llt, 2.0, rng).transpose();
  const Matrix expect = 4.0 * car_covariance(path_adjacency(3), 0.8);
  CHECK(rel_frobenius(sample_covariance(draws), expect) < 0.02);
  // mean within 4 standard errors in every coordinate
  const Vector mean = draws.colwise().mean();
  for (int r = 0; r < 3; ++r) CHECK(std::abs(mean[r]) < 4.0 * std::sqrt(expect(r, r) / n));
}

TEST_CASE("gmrf draws are reproducible") {
  RegionGraph g(cycle_adjacency(6));
  RandomStream a(42), b(42);
  for (int k = 0; k < 10; ++k) CHECK(sample_gmrf(g, 0.3, 1.5, a) == sample_gmrf(g, 0.3, 1.5, b));
}

TEST_CASE("edge list round trip") {
  const auto dir = scratch_dir("edges");
  Matrix w = cycle_adjacency(5);
  w(0, 1) = w(1, 0) = 0.25;
  std::vector<std::string> labels{"a", "b", "c", "d", "e"};
  RegionGraph g(w, labels);
  write_edge_list((dir / "g.csv").string(), g);
  RegionGraph back = load_edge_list((dir / "g.csv").string(), labels);
  CHECK(back.adjacency() == w);

  // resolved against labels, not file order
  std::vector<std::string> shuffled{"e", "d", "c", "b", "a"};
  RegionGraph perm = load_edge_list((dir / "g.csv").string(), shuffled);
  CHECK(perm.adjacency()(4, 3) == 0.25);

  std::ofstream(dir / "bad.csv") << "region_a,region_b\na,zz\n";
  CHECK_THROWS_WITH_AS(load_edge_list((dir / "bad.csv").string(), labels), doctest::Contains("zz"), SchemaError);
  std::ofstream(dir / "dup.csv") << "region_a,region_b\na,b\nb,a\n";
  CHECK_THROWS_AS(load_edge_list((dir / "dup.csv").string(), labels), SchemaError);
  std::ofstream(dir / "nohead.csv") << "a,b\n";
  CHECK_THROWS_AS(load_edge_list((dir / "nohead.csv").string(), labels), SchemaError);
}
