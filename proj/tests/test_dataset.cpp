#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"

using namespace adacate;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path =
      (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_csv reads a small file") {
  const std::string path = write_temp(
      "ds_small.csv", "z,t,y,x1\n0,1,1.5,0.25\n1,0,-2,1\n0,0,3,-0.5\n");
  StudyDataset ds = load_csv(path);
  REQUIRE(ds.size() == 3);
  REQUIRE(ds.dim() == 1);
  REQUIRE(ds.n_trial() == 2);
  REQUIRE(ds.n_os() == 1);
  REQUIRE(ds.records()[0].y == 1.5);
  REQUIRE(ds.records()[1].x[0] == 1.0);
}

TEST_CASE("load_csv rejects domain violations with row locations") {
  const std::string path =
      write_temp("ds_badt.csv", "z,t,y,x1\n0,1,1,0\n0,2,1,0\n");
  REQUIRE_THROWS_MATCHES(load_csv(path), ParseError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("row 3") &&
                             ContainsSubstring("t=2")));

  const std::string missing = write_temp("ds_missing.csv", "z,t,x1\n0,1,0\n");
  REQUIRE_THROWS_MATCHES(load_csv(missing), ParseError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("missing column 'y'")));

  const std::string bad_cell =
      write_temp("ds_badcell.csv", "z,t,y,x1\n0,1,1,0\n0,1,oops,0\n");
  REQUIRE_THROWS_MATCHES(load_csv(bad_cell), ParseError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("row 3") &&
                             ContainsSubstring("'oops'")));

  const std::string empty = write_temp("ds_empty.csv", "z,t,y,x1\n");
  REQUIRE_THROWS_MATCHES(load_csv(empty), ParseError,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("zero data rows")));
}

TEST_CASE("load_csv with permuted columns and explicit schema matches canonical") {
  const std::string canonical = write_temp(
      "ds_canon.csv", "z,t,y,x1,x2\n0,1,1.25,0.5,-1\n1,0,2.5,0.75,2\n");
  const std::string permuted = write_temp(
      "ds_perm.csv", "x2,y,z,x1,t\n-1,1.25,0,0.5,1\n2,2.5,1,0.75,0\n");
  StudyDataset a = load_csv(canonical);
  CsvSchema schema;
  schema.x_columns = {"x1", "x2"};
  StudyDataset b = load_csv(permuted, schema);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.records()[i].z == b.records()[i].z);
    REQUIRE(a.records()[i].t == b.records()[i].t);
    REQUIRE(a.records()[i].y == b.records()[i].y);
    REQUIRE(a.records()[i].x == b.records()[i].x);
  }
}

TEST_CASE("csv round trip is field-identical") {
  std::mt19937_64 rng(7);
  StudyDataset ds = testutil::random_dataset(rng, 5, 9);
  const std::string path =
      (std::filesystem::temp_directory_path() / "ds_rt.csv").string();
  write_csv(path, ds);
  StudyDataset back = load_csv(path);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(back.records()[i].z == ds.records()[i].z);
    REQUIRE(back.records()[i].t == ds.records()[i].t);
    REQUIRE(back.records()[i].y == ds.records()[i].y);
    REQUIRE(back.records()[i].x == ds.records()[i].x);
  }
}

TEST_CASE("stratified split sizes and determinism") {
  std::vector<UnitRecord> records;
  for (int i = 0; i < 50; ++i) records.push_back(testutil::rec(0, i % 2, i, {0.1 * i}));
  for (int i = 0; i < 50; ++i) records.push_back(testutil::rec(1, i % 2, i, {0.1 * i}));
  StudyDataset ds{records};

  auto [train, valid] = split_train_validation(ds, 0.2, 123);
  REQUIRE(train.size() == 20);
  REQUIRE(valid.size() == 80);
  REQUIRE(train.n_trial() == 10);
  REQUIRE(train.n_os() == 10);

  auto [train2, valid2] = split_train_validation(ds, 0.2, 123);
  for (std::size_t i = 0; i < train.size(); ++i)
    REQUIRE(train.records()[i].y == train2.records()[i].y);
  for (std::size_t i = 0; i < valid.size(); ++i)
    REQUIRE(valid.records()[i].y == valid2.records()[i].y);
}

TEST_CASE("split with a single-record stratum is infeasible") {
  // One trial record cannot appear in both parts.
  StudyDataset ds{{testutil::rec(0, 1, 1, {0.0}), testutil::rec(1, 0, 2, {0.0}),
                   testutil::rec(1, 1, 3, {0.0}), testutil::rec(1, 0, 4, {0.0})}};
  REQUIRE_THROWS_MATCHES(split_train_validation(ds, 0.5, 1), Error,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("infeasible")));
}

TEST_CASE("split partition property: union is the input multiset") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    StudyDataset ds = testutil::random_dataset(rng, 3 + trial, 5 + 2 * trial);
    auto [train, valid] = split_train_validation(ds, 0.3, 1000 + trial);
    REQUIRE(train.size() + valid.size() == ds.size());
    auto key = [](const UnitRecord& r) {
      return std::make_tuple(r.z, r.t, r.y, r.x[0], r.x[1]);
    };
    std::vector<std::tuple<int, int, double, double, double>> all, parts;
    for (const auto& r : ds.records()) all.push_back(key(r));
    for (const auto& r : train.records()) parts.push_back(key(r));
    for (const auto& r : valid.records()) parts.push_back(key(r));
    std::sort(all.begin(), all.end());
    std::sort(parts.begin(), parts.end());
    REQUIRE(all == parts);
  }
}

TEST_CASE("reduction: ECDF percentile of a column") {
  // reference of m distinct values: minimum maps to 1/m
  std::vector<UnitRecord> ref_records;
  for (int i = 0; i < 10; ++i)
    ref_records.push_back(testutil::rec(i % 2, 0, 0.0, {static_cast<double>(i)}));
  StudyDataset reference{ref_records};

  ReductionSpec spec;
  spec.kind = ReductionSpec::Kind::pct_column;
  spec.column = 0;
  StudyDataset one{{testutil::rec(0, 0, 0.0, {0.0})}};
  REQUIRE(apply_reduction(spec, one, reference)[0] == Catch::Approx(0.1));

  // median of 101 distinct values maps to 51/101
  std::vector<UnitRecord> ref101;
  for (int i = 0; i < 101; ++i)
    ref101.push_back(testutil::rec(i % 2, 0, 0.0, {static_cast<double>(i)}));
  StudyDataset reference101{ref101};
  StudyDataset median{{testutil::rec(0, 0, 0.0, {50.0})}};
  REQUIRE(apply_reduction(spec, median, reference101)[0] ==
          Catch::Approx(51.0 / 101.0));
}

TEST_CASE("reduction: raw column kind, 0-based index") {
  ReductionSpec spec;
  spec.kind = ReductionSpec::Kind::column;
  spec.column = 2;
  StudyDataset data{{testutil::rec(0, 0, 0.0, {5.0, 7.0, 9.0})}};
  REQUIRE(apply_reduction(spec, data, data)[0] == 9.0);

  spec.column = 3;
  REQUIRE_THROWS_MATCHES(apply_reduction(spec, data, data), Error,
                         Catch::Matchers::MessageMatches(
                             ContainsSubstring("out of range")));
}

TEST_CASE("ECDF monotonicity") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  std::vector<double> ref;
  for (int i = 0; i < 64; ++i) ref.push_back(normal(rng));
  Ecdf ecdf(ref);
  double prev = -1.0;
  for (double x = -3.0; x <= 3.0; x += 0.05) {
    const double f = ecdf(x);
    REQUIRE(f >= prev);
    REQUIRE(f >= 0.0);
    REQUIRE(f <= 1.0);
    prev = f;
  }
}

TEST_CASE("dataset validation rejects bad records") {
  REQUIRE_THROWS_AS(StudyDataset{{testutil::rec(2, 0, 0.0, {0.0})}}, ParseError);
  REQUIRE_THROWS_AS(StudyDataset{{testutil::rec(0, 0, std::nan(""), {0.0})}},
                    ParseError);
  StudyDataset onecol{{testutil::rec(0, 0, 0.0, {0.0})}};
  std::vector<UnitRecord> mixed = {testutil::rec(0, 0, 0.0, {0.0}),
                                   testutil::rec(0, 0, 0.0, {0.0, 1.0})};
  REQUIRE_THROWS_AS(StudyDataset{mixed}, ParseError);
}

TEST_CASE("evaluation grid validation") {
  EvaluationGrid empty;
  REQUIRE_THROWS_AS(empty.validate(), Error);
  EvaluationGrid g = even_grid(19);
  REQUIRE(g.points.size() == 19);
  REQUIRE(g.points.front() == Catch::Approx(0.05));
  REQUIRE(g.points.back() == Catch::Approx(0.95));
}
