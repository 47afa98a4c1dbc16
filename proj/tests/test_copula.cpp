// Latent-normal margins: scaled ECDF probits, pseudo-inverse, clamping,
// discreteness rejection, and persistence.
#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "mvfr/copula.hpp"
#include "mvfr/errors.hpp"
#include "mvfr/rng.hpp"

using namespace mvfr;

namespace {

MultiviewDataset one_column(const std::vector<double>& xs) {
  MultiviewDataset d;
  d.views.resize(1);
  d.observed.resize(1);
  d.views[0].resize(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) d.views[0](static_cast<Eigen::Index>(i), 0) = xs[i];
  d.observed[0] = BoolMatrix::Constant(d.views[0].rows(), 1, true);
  d.feature_names = {{"f"}};
  return d;
}

}  // namespace

TEST_CASE("three-point column maps to quartile probits") {
  const auto [z, model] = to_latent(one_column({1.0, 2.0, 3.0}));
  const boost::math::normal_distribution<double> norm;
  CHECK(z.views[0](0, 0) == doctest::Approx(quantile(norm, 0.25)).epsilon(1e-4));
  CHECK(z.views[0](1, 0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(z.views[0](2, 0) == doctest::Approx(quantile(norm, 0.75)).epsilon(1e-4));
  CHECK(std::abs(z.views[0](0, 0) + 0.6745) < 1e-4);
  // maximum maps inside (0,1): finite z
  CHECK(std::isfinite(z.views[0](2, 0)));
}

TEST_CASE("ties share one latent value; order is preserved") {
  const auto [z, model] = to_latent(one_column({5.0, 1.0, 5.0, 2.0}));
  CHECK(z.views[0](0, 0) == z.views[0](2, 0));
  CHECK(z.views[0](1, 0) < z.views[0](3, 0));
  CHECK(z.views[0](3, 0) < z.views[0](0, 0));
  // tied pair has max rank 4 of n+1 = 5
  const auto& margin = model.margins[0][0];
  CHECK(margin.ranks == std::vector<std::int64_t>{1, 2, 4});
}

TEST_CASE("rank order is preserved exactly on a large noisy column") {
  RngStream rng(99, {Rv::Test, 0, 0, 0});
  std::vector<double> xs(10000);
  for (auto& x : xs) x = std::exp(2.0 * rng.normal());  // heavy-tailed, positive
  const auto [z, model] = to_latent(one_column(xs));
  std::vector<std::size_t> by_x(xs.size()), by_z(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) by_x[i] = by_z[i] = i;
  std::stable_sort(by_x.begin(), by_x.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::stable_sort(by_z.begin(), by_z.end(), [&](auto a, auto b) {
    return z.views[0](static_cast<Eigen::Index>(a), 0) < z.views[0](static_cast<Eigen::Index>(b), 0);
  });
  CHECK(by_x == by_z);
}

TEST_CASE("pseudo-inverse: smallest support value whose ECDF covers Phi(z)") {
  const auto [z, model] = to_latent(one_column({1.0, 2.0, 3.0}));
  const auto& m = model.margins[0][0];
  // ECDF(1)=0.25 < 0.5, ECDF(2)=0.5 >= 0.5
  CHECK(m.from_z(0.0) == 2.0);
  CHECK(m.from_z(-10.0) == 1.0);  // clamp to minimum
  CHECK(m.from_z(10.0) == 3.0);   // clamp to maximum
  // monotone nondecreasing in z
  double prev = -1e300;
  for (double zz = -4.0; zz <= 4.0; zz += 0.01) {
    const double x = m.from_z(zz);
    CHECK(x >= prev);
    prev = x;
  }
}

TEST_CASE("round-trip is exact for every observed value") {
  RngStream rng(7, {Rv::Test, 1, 0, 0});
  std::vector<double> xs(500);
  for (auto& x : xs) x = std::cbrt(rng.normal()) * 3.0 + rng.uniform();
  xs[17] = xs[401];  // plant a tie
  const auto [z, model] = to_latent(one_column(xs));
  const auto& m = model.margins[0][0];
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(m.from_z(z.views[0](static_cast<Eigen::Index>(i), 0)) == xs[i]);
}

TEST_CASE("out-of-support values clamp on both transforms") {
  const auto [z, model] = to_latent(one_column({1.0, 2.0, 3.0, 4.0}));
  const auto& m = model.margins[0][0];
  CHECK(m.to_z(-100.0) == m.to_z(1.0));   // below support: minimum's z
  CHECK(m.to_z(100.0) == m.to_z(4.0));    // above support: maximum's z
  CHECK(m.to_z(2.5) == m.to_z(2.0));      // interior gap: ECDF is a step function

  // new data transformed with training margins
  auto fresh = one_column({0.0, 2.5, 50.0});
  const auto applied = apply_margins(fresh, model);
  CHECK(applied.views[0](0, 0) == m.to_z(1.0));
  CHECK(applied.views[0](1, 0) == m.to_z(2.0));
  CHECK(applied.views[0](2, 0) == m.to_z(4.0));
}

TEST_CASE("masked entries pass through; response is untouched") {
  auto d = one_column({1.0, 2.0, 3.0, 4.0});
  d.observed[0](1, 0) = false;
  d.response.resize(4);
  d.response << 9.0, 8.0, 7.0, 6.0;
  d.response_observed = {1, 1, 1, 1};
  const auto [z, model] = to_latent(d);
  CHECK_FALSE(z.observed[0](1, 0));
  CHECK(z.response(0) == 9.0);
  CHECK(model.margins[0][0].n_obs == 3);  // the masked 2.0 never entered the margin
  CHECK(model.margins[0][0].values == std::vector<double>{1.0, 3.0, 4.0});
}

TEST_CASE("discrete-looking and empty features are rejected") {
  // 30 copies of 1.0 in n=100 >> max(2, 5) -> discrete
  std::vector<double> xs(100);
  RngStream rng(3, {Rv::Test, 2, 0, 0});
  for (auto& x : xs) x = rng.normal();
  for (std::size_t i = 0; i < 30; ++i) xs[i] = 1.0;
  try {
    to_latent(one_column(xs));
    FAIL("expected discreteness rejection");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("discrete") != std::string::npos);
    CHECK(std::string(e.what()).find("f") != std::string::npos);
  }
  // a modest tie count stays legal: 5 copies in n=100 == max(2, 5) is allowed
  for (std::size_t i = 0; i < 30; ++i) xs[i] = rng.normal();
  for (std::size_t i = 0; i < 5; ++i) xs[i] = 1.0;
  CHECK_NOTHROW(to_latent(one_column(xs)));

  auto d = one_column({1.0, 2.0});
  d.observed[0].setConstant(false);
  CHECK_THROWS_AS(to_latent(d), DataError);
}

TEST_CASE("margins persist bit-identically") {
  RngStream rng(11, {Rv::Test, 3, 0, 0});
  std::vector<double> xs(200);
  for (auto& x : xs) x = rng.normal() * 1e-3 + 4.0;
  xs[3] = xs[90];
  auto d = one_column(xs);
  // second feature with its own margin
  MultiviewDataset two = d;
  two.views[0].conservativeResize(Eigen::NoChange, 2);
  two.observed[0].conservativeResize(Eigen::NoChange, 2);
  for (Eigen::Index i = 0; i < two.views[0].rows(); ++i) {
    two.views[0](i, 1) = rng.uniform() * 10.0;
    two.observed[0](i, 1) = true;
  }
  two.feature_names[0].push_back("g");
  const auto [z, model] = to_latent(two);
  const std::string path = "copula_margins_test.txt";
  save_margins(path, model);
  const auto loaded = load_margins(path);
  std::remove(path.c_str());
  REQUIRE(loaded.margins.size() == model.margins.size());
  for (std::size_t m = 0; m < model.margins.size(); ++m) {
    REQUIRE(loaded.margins[m].size() == model.margins[m].size());
    for (std::size_t j = 0; j < model.margins[m].size(); ++j) {
      CHECK(loaded.margins[m][j].n_obs == model.margins[m][j].n_obs);
      CHECK(loaded.margins[m][j].values == model.margins[m][j].values);
      CHECK(loaded.margins[m][j].ranks == model.margins[m][j].ranks);
      CHECK(loaded.margins[m][j].zscores == model.margins[m][j].zscores);
    }
  }
  CHECK_THROWS_AS(load_margins("no_such_margins.txt"), DataError);
}
