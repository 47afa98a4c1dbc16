// Dataset ingestion, masks, standardization, and file round-trips.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "mvfr/dataset.hpp"
#include "mvfr/errors.hpp"

using namespace mvfr;

namespace {

struct TempFile {
  std::string path;
  TempFile(const std::string& name, const std::string& content) : path(name) {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

MultiviewDataset tiny_two_view() {
  MultiviewDataset d;
  d.views.resize(2);
  d.observed.resize(2);
  d.views[0].resize(3, 2);
  d.views[0] << 1.0, 4.0, 2.0, 5.0, 3.0, 9.0;
  d.views[1].resize(3, 1);
  d.views[1] << -1.5, 0.0, 1.5;
  d.observed[0] = BoolMatrix::Constant(3, 2, true);
  d.observed[1] = BoolMatrix::Constant(3, 1, true);
  d.feature_names = {{"g1", "g2"}, {"m1"}};
  d.subject_ids = {"1", "2", "3"};
  d.response.resize(3);
  d.response << 10.0, 20.0, 60.0;
  d.response_observed = {1, 1, 1};
  return d;
}

}  // namespace

TEST_CASE("well-formed CSVs load with full masks") {
  TempFile v1("ds_v1.csv", "a,b\n1,2\n3,4\n5,6\n");
  TempFile v2("ds_v2.csv", "c,d\n7,8\n9,10\n11,12\n");
  const auto d = load_dataset({v1.path, v2.path});
  CHECK(d.n_views() == 2);
  CHECK(d.n() == 3);
  CHECK(d.p(0) == 2);
  CHECK(d.p(1) == 2);
  CHECK(d.views[0](1, 0) == 3.0);
  CHECK(d.views[1](2, 1) == 12.0);
  CHECK(d.observed[0].all());
  CHECK(d.observed[1].all());
  CHECK(d.feature_names[0] == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(d.has_response());
  CHECK(d.subject_ids == std::vector<std::string>{"1", "2", "3"});
}

TEST_CASE("NA and empty cells become masked entries") {
  TempFile v1("ds_na.csv", "a,b\n1,NA\n,4\n5,6\n");
  const auto d = load_dataset({v1.path});
  CHECK_FALSE(d.observed[0](0, 1));
  CHECK_FALSE(d.observed[0](1, 0));
  CHECK(d.observed[0](0, 0));
  CHECK(std::isnan(d.views[0](0, 1)));  // sentinel, never read as data
  CHECK(d.views[0](2, 0) == 5.0);
}

TEST_CASE("response file loads and masks like the views") {
  TempFile v1("ds_rv.csv", "a\n1\n2\n3\n");
  TempFile ry("ds_ry.csv", "y\n0.5\nNA\n-2\n");
  const auto d = load_dataset({v1.path}, ry.path);
  CHECK(d.has_response());
  CHECK(d.response(0) == 0.5);
  CHECK(d.response_observed == std::vector<char>{1, 0, 1});
  CHECK_FALSE(d.response_complete());
  CHECK_THROWS_AS(d.validate(true), DataError);  // supervised needs complete y
}

TEST_CASE("structural errors carry locations") {
  TempFile v1("ds_e1.csv", "a\n1\n2\n3\n");
  TempFile v2("ds_e2.csv", "b\n1\n2\n");
  CHECK_THROWS_AS(load_dataset({v1.path, v2.path}), DataError);  // row-count mismatch

  TempFile bad("ds_e3.csv", "a,b\n1,2\n3,oops\n");
  try {
    load_dataset({bad.path});
    FAIL("expected parse error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("oops") != std::string::npos);
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }

  TempFile ragged("ds_e4.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(load_dataset({ragged.path}), DataError);
  TempFile empty("ds_e5.csv", "");
  CHECK_THROWS_AS(load_dataset({empty.path}), DataError);
  CHECK_THROWS_AS(load_dataset({"no_such_file.csv"}), DataError);
  TempFile y2("ds_e6.csv", "y,z\n1,2\n2,3\n3,4\n");
  CHECK_THROWS_AS(load_dataset({v1.path}, y2.path), DataError);  // 2-column response
}

TEST_CASE("alternate delimiter") {
  TempFile v1("ds_semi.csv", "a;b\n1;2\n3;4\n");
  CsvOptions opts;
  opts.delimiter = ';';
  const auto d = load_dataset({v1.path}, std::nullopt, opts);
  CHECK(d.p(0) == 2);
  CHECK(d.views[0](1, 1) == 4.0);
}

TEST_CASE("standardize centers and scales over observed entries") {
  MultiviewDataset d;
  d.views.resize(1);
  d.observed.resize(1);
  d.views[0].resize(3, 2);
  d.views[0] << 1.0, -1.0, 2.0, 0.0, 3.0, 1.0;
  d.observed[0] = BoolMatrix::Constant(3, 2, true);
  d.feature_names = {{"f1", "f2"}};

  const auto [z, rec] = standardize(d);
  CHECK(z.views[0](0, 0) == doctest::Approx(-1.0));
  CHECK(z.views[0](1, 0) == doctest::Approx(0.0));
  CHECK(z.views[0](2, 0) == doctest::Approx(1.0));
  CHECK(rec.mean[0](0) == doctest::Approx(2.0));
  CHECK(rec.sd[0](0) == doctest::Approx(1.0));  // n-1 denominator
  CHECK(rec.sd[0](1) == doctest::Approx(1.0));

  // idempotence: standardizing a standardized column is the identity
  const auto [z2, rec2] = standardize(z);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      CHECK(z2.views[0](i, j) == doctest::Approx(z.views[0](i, j)).epsilon(1e-12));

  // inversion is the identity on observed entries
  const auto back = unstandardize(z, rec);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      CHECK(back.views[0](i, j) == doctest::Approx(d.views[0](i, j)).epsilon(1e-12));
}

TEST_CASE("standardize uses only observed entries and keeps holes masked") {
  MultiviewDataset d;
  d.views.resize(1);
  d.observed.resize(1);
  d.views[0].resize(4, 1);
  d.views[0] << 1.0, 100.0, 3.0, 5.0;
  d.observed[0] = BoolMatrix::Constant(4, 1, true);
  d.observed[0](1, 0) = false;  // the 100 never enters the statistics
  d.feature_names = {{"f"}};
  const auto [z, rec] = standardize(d);
  CHECK(rec.mean[0](0) == doctest::Approx(3.0));
  CHECK(rec.sd[0](0) == doctest::Approx(2.0));
  CHECK(z.views[0](0, 0) == doctest::Approx(-1.0));
  CHECK(std::isnan(z.views[0](1, 0)));
  CHECK_FALSE(z.observed[0](1, 0));
}

TEST_CASE("standardize rejects degenerate features by name") {
  MultiviewDataset d;
  d.views.resize(1);
  d.observed.resize(1);
  d.views[0].resize(3, 1);
  d.views[0] << 5.0, 5.0, 5.0;
  d.observed[0] = BoolMatrix::Constant(3, 1, true);
  d.feature_names = {{"flatline"}};
  try {
    standardize(d);
    FAIL("expected constant-feature error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("flatline") != std::string::npos);
  }
  d.views[0] << 1.0, 2.0, 3.0;
  d.observed[0](0, 0) = d.observed[0](1, 0) = false;  // one observed value left
  CHECK_THROWS_AS(standardize(d), DataError);

  MultiviewDataset r = tiny_two_view();
  r.response.setConstant(4.0);
  CHECK_THROWS_AS(standardize(r), DataError);  // constant response
}

TEST_CASE("apply_standardization reuses a training record on new data") {
  const auto d = tiny_two_view();
  const auto [z, rec] = standardize(d);
  CHECK(rec.standardizes_response);

  MultiviewDataset fresh = d;
  fresh.views[0](0, 0) = 7.0;  // new subject values, same features
  const auto z2 = apply_standardization(fresh, rec);
  CHECK(z2.views[0](0, 0) == doctest::Approx((7.0 - rec.mean[0](0)) / rec.sd[0](0)));
  // response transformed with the training scale too
  CHECK(z2.response(2) == doctest::Approx((60.0 - rec.response_mean) / rec.response_sd));

  MultiviewDataset wrong = d;
  wrong.views.pop_back();
  wrong.observed.pop_back();
  wrong.feature_names.pop_back();
  CHECK_THROWS_AS(apply_standardization(wrong, rec), DataError);
}

TEST_CASE("write/load round-trip is exact on values and masks") {
  MultiviewDataset d = tiny_two_view();
  d.views[0](0, 0) = 3.141592653589793;
  d.views[0](2, 1) = -1.0e-17;
  d.views[1](1, 0) = 12345.678901234567;
  d.observed[0](1, 1) = false;
  d.views[0](1, 1) = std::numeric_limits<double>::quiet_NaN();
  d.response(1) = 0.1 + 0.2;  // not exactly 0.3

  const std::vector<std::string> paths = {"ds_rt_v1.csv", "ds_rt_v2.csv"};
  const std::string ypath = "ds_rt_y.csv";
  write_dataset(d, paths, ypath);
  const auto back = load_dataset(paths, ypath);
  CHECK(same_data(back, d));
  CHECK(back.views[0](0, 0) == 3.141592653589793);  // bit-exact through %.17g
  CHECK(back.response(1) == 0.1 + 0.2);
  for (const auto& pth : paths) std::remove(pth.c_str());
  std::remove(ypath.c_str());
}

TEST_CASE("validate catches inconsistent shapes") {
  MultiviewDataset d = tiny_two_view();
  d.observed[1] = BoolMatrix::Constant(2, 1, true);
  CHECK_THROWS_AS(d.validate(), DataError);

  MultiviewDataset e = tiny_two_view();
  e.response.resize(2);
  CHECK_THROWS_AS(e.validate(), DataError);

  MultiviewDataset f = tiny_two_view();
  f.feature_names[0] = {"only_one"};
  CHECK_THROWS_AS(f.validate(), DataError);

  CHECK_NOTHROW(tiny_two_view().validate(true));
}
