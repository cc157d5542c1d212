#include <doctest.h>

#include "lsnm/csv.hpp"
#include "lsnm/dataset.hpp"
#include "support.hpp"

using namespace lsnm;
using namespace lsnm::test;

TEST_CASE("csv doubles round trip exactly") {
  RandomStream rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double x = rng.gaussian() * std::pow(10.0, 8.0 * rng.uniform() - 4.0);
    CHECK(csv::parse_double(csv::format_double(x), "x") == x);
  }
  CHECK(csv::is_number("1e-3"));
  CHECK(csv::is_number("-inf"));
  CHECK_FALSE(csv::is_number("F"));
  CHECK_FALSE(csv::is_number("1.0x"));
  CHECK_THROWS_AS(csv::parse_double("abc", "ctx"), SchemaError);
}

TEST_CASE("dataset load and write are byte-identical") {
  const auto dir = scratch_dir("dataset_rt");
  const std::string text =
      "subject,visit,region,y,age,sex,abnormal,site\n"
      "p1,1,lh,0.5,70.25,F,0,A\n"
      "p1,1,rh,-1.25,70.25,F,0,A\n"
      "p1,2,lh,0.125,71.75,F,0,B\n"
      "p2,1,rh,2,64,M,1,A\n"
      "p2,1,lh,1e-05,64,M,1,A\n";
  std::ofstream(dir / "in.csv") << text;
  LongDataset d = load_dataset((dir / "in.csv").string());
  CHECK(d.n_subjects() == 2);
  CHECK(d.n_regions() == 2);
  CHECK(d.n_visits() == 3);
  CHECK(d.n_obs() == 5);
  CHECK(d.reference_flag == std::vector<int>{0, 1});
  CHECK(d.covariate_names == std::vector<std::string>{"(intercept)", "age", "sex[M]", "site[B]"});
  CHECK(d.has_intercept());
  CHECK(d.X(1, 1) == 71.75);
  CHECK(d.X(1, 3) == 1.0);
  CHECK(d.X(0, 3) == 0.0);
  CHECK(d.region_counts(0) == Vector::Constant(2, 1.0) + Vector::Unit(2, 0));
  write_dataset((dir / "out.csv").string(), d);
  CHECK(slurp(dir / "out.csv") == text);
  LongDataset again = load_dataset((dir / "out.csv").string());
  CHECK(again.y == d.y);
  CHECK(again.X == d.X);
}

TEST_CASE("dataset schema violations") {
  const auto dir = scratch_dir("dataset_bad");
  auto load = [&](const std::string& body) {
    std::ofstream(dir / "d.csv") << body;
    return load_dataset((dir / "d.csv").string());
  };
  CHECK_THROWS_AS(load("subject,visit,region\n"), SchemaError);
  CHECK_THROWS_AS(load("subject,visit,region,y\n"), SchemaError);
  CHECK_THROWS_AS(load("subject,visit,region,y\na,0,r,1\n"), SchemaError);
  CHECK_THROWS_AS(load("subject,visit,region,y\na,1,r,1\na,1,r,2\n"), SchemaError);
  CHECK_THROWS_AS(load("subject,visit,region,y,age\na,1,r,1,60\na,1,q,1,61\n"), SchemaError);
  CHECK_THROWS_AS(load("subject,visit,region,y,abnormal\na,1,r,1,0\na,2,r,1,1\n"), SchemaError);
  CHECK_THROWS_AS(load("subject,visit,region,y\na,1,r,nan\n"), SchemaError);
}

TEST_CASE("subset re-indexes subjects") {
  RandomStream rng(2);
  LongDataset d = toy_dataset({2, 3, 1}, 3, rng);
  LongDataset s = d.subset({2, 0});
  CHECK(s.subject_ids == std::vector<std::string>{"s3", "s1"});
  CHECK(s.n_obs() == 9);
  CHECK(s.visits_of(0) == 1);
  CHECK(s.y.head(6) == d.y.head(6));  // observations keep their original order
  CHECK(s.y.tail(3) == d.y.segment(15, 3));
  CHECK_NOTHROW(s.validate());
}
