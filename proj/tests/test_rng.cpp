#include "mvfr/rng.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <vector>

#include "doctest.h"
#include "mvfr/errors.hpp"
#include "test_support.hpp"

using mvfr::Rv;
using mvfr::RngStream;
using mvfr::StreamLabel;

namespace {
RngStream stream(std::uint64_t seed, std::int64_t unit = 0, std::int64_t step = 0) {
  return RngStream(seed, {Rv::Test, 0, unit, step});
}
}  // namespace

TEST_CASE("streams are reproducible and label-separated") {
  auto a = stream(42, 7, 3);
  auto b = stream(42, 7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  auto c = stream(42, 7, 4);
  auto d = stream(43, 7, 3);
  bool all_same_c = true, all_same_d = true;
  auto e = stream(42, 7, 3);
  for (int i = 0; i < 16; ++i) {
    const auto r = e.next_u64();
    all_same_c &= (c.next_u64() == r);
    all_same_d &= (d.next_u64() == r);
  }
  CHECK_FALSE(all_same_c);
  CHECK_FALSE(all_same_d);
}

TEST_CASE("uniform draws pass KS against U(0,1) and stay inside the open interval") {
  auto rng = stream(1);
  std::vector<double> xs(10000);
  for (auto& x : xs) {
    x = rng.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
  const double d = testsupport::ks_statistic(xs, [](double x) { return x; });
  CHECK(testsupport::ks_pvalue(d, xs.size()) > 0.001);
}

TEST_CASE("normal draws pass KS against the standard normal") {
  auto rng = stream(2);
  std::vector<double> xs(10000);
  boost::math::normal_distribution<double> dist;
  for (auto& x : xs) x = rng.normal();
  const double d =
      testsupport::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); });
  CHECK(testsupport::ks_pvalue(d, xs.size()) > 0.001);
}

TEST_CASE("gamma draws pass KS for shapes below and above one") {
  for (double shape : {0.5, 2.7}) {
    auto rng = stream(3, static_cast<std::int64_t>(shape * 10));
    const double rate = 1.3;
    boost::math::gamma_distribution<double> dist(shape, 1.0 / rate);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = rng.gamma(shape, rate);
    const double d =
        testsupport::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); });
    CHECK(testsupport::ks_pvalue(d, xs.size()) > 0.001);
  }
}

TEST_CASE("inverse gamma matches its CDF and analytic means") {
  auto rng = stream(4);
  boost::math::inverse_gamma_distribution<double> dist(3.0, 1.0);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.inverse_gamma(3.0, 1.0);
  const double d =
      testsupport::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); });
  CHECK(testsupport::ks_pvalue(d, xs.size()) > 0.001);

  // mean b/(a-1): InvGa(3,1) -> 0.5, InvGa(10,30) -> 30/9
  auto rng2 = stream(5);
  std::vector<double> m1(100000), m2(100000);
  for (auto& x : m1) x = rng2.inverse_gamma(3.0, 1.0);
  for (auto& x : m2) x = rng2.inverse_gamma(10.0, 30.0);
  CHECK(testsupport::mean_of(m1) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(testsupport::mean_of(m2) == doctest::Approx(30.0 / 9.0).epsilon(0.01));

  CHECK_THROWS_AS((void)rng.inverse_gamma(0.0, 1.0), mvfr::ConfigError);
  CHECK_THROWS_AS((void)rng.gamma(-1.0, 1.0), mvfr::ConfigError);
}

TEST_CASE("beta draws pass KS and hit the Be(1,alpha) mean") {
  auto rng = stream(6);
  boost::math::beta_distribution<double> dist(2.0, 3.5);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.beta(2.0, 3.5);
  const double d =
      testsupport::ks_statistic(xs, [&](double x) { return boost::math::cdf(dist, x); });
  CHECK(testsupport::ks_pvalue(d, xs.size()) > 0.001);

  std::vector<double> ms(100000);
  for (auto& x : ms) x = rng.beta(1.0, 5.0);
  CHECK(std::abs(testsupport::mean_of(ms) - 1.0 / 6.0) < 0.005);
}

TEST_CASE("bernoulli and categorical behave on the boundary cases") {
  auto rng = stream(7);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += rng.bernoulli(0.3);
  CHECK(std::abs(ones / 100000.0 - 0.3) < 0.01);
  CHECK(rng.bernoulli(0.0) == 0);
  CHECK(rng.bernoulli(1.0) == 1);
  CHECK_THROWS_AS((void)rng.bernoulli(1.5), mvfr::ConfigError);

  Eigen::VectorXd even(2);
  even << 0.0, 0.0;
  int first = 0;
  for (int i = 0; i < 100000; ++i) first += (rng.categorical_log(even) == 0);
  CHECK(std::abs(first / 100000.0 - 0.5) < 0.01);

  Eigen::VectorXd lopsided(2);
  lopsided << 0.0, -1000.0;
  for (int i = 0; i < 1000; ++i) REQUIRE(rng.categorical_log(lopsided) == 0);

  Eigen::VectorXd log_shifted(3);  // invariance to a common shift of log-weights
  log_shifted << 500.0, 500.0 + std::log(2.0), 500.0 + std::log(3.0);
  Eigen::Vector3d freq = Eigen::Vector3d::Zero();
  for (int i = 0; i < 60000; ++i) freq[rng.categorical_log(log_shifted)] += 1.0;
  freq /= 60000.0;
  CHECK(freq[0] == doctest::Approx(1.0 / 6.0).epsilon(0.07));
  CHECK(freq[1] == doctest::Approx(2.0 / 6.0).epsilon(0.06));
  CHECK(freq[2] == doctest::Approx(3.0 / 6.0).epsilon(0.05));

  Eigen::VectorXd bad(2);
  bad << -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS((void)rng.categorical_log(bad), mvfr::NumericalError);
}

TEST_CASE("precision-based MVN draws match conjugate-normal moments") {
  // precision I2, zero linear term -> standard normal pair
  auto rng = stream(8);
  Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  mvfr::PrecisionSolver ps(I2);
  const int N = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sumsq = Eigen::Matrix2d::Zero();
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd x = ps.draw(rng, zero);
    sum += x;
    sumsq += x * x.transpose();
  }
  const Eigen::Vector2d mean = sum / N;
  const Eigen::Matrix2d cov = sumsq / N - mean * mean.transpose();
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
  CHECK((cov - I2).cwiseAbs().maxCoeff() < 0.03);

  // precision diag(4), linear term 8 -> mean 2, variance 1/4
  Eigen::MatrixXd p1(1, 1);
  p1 << 4.0;
  Eigen::VectorXd u1(1);
  u1 << 8.0;
  double s = 0.0;
  for (int i = 0; i < N; ++i) s += mvfr::draw_mvn_from_precision(rng, p1, u1)[0];
  CHECK(std::abs(s / N - 2.0) < 0.02);

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(mvfr::PrecisionSolver{indef}, mvfr::NumericalError);
}

TEST_CASE("MVN draw correlations track the requested precision") {
  auto rng = stream(9);
  Eigen::MatrixXd P(2, 2);
  P << 2.0, -0.8, -0.8, 1.5;
  const Eigen::MatrixXd target = P.inverse();
  mvfr::PrecisionSolver ps(P);
  Eigen::VectorXd u(2);
  u << 1.0, -1.0;
  const Eigen::VectorXd target_mean = P.inverse() * u;
  const int N = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sumsq = Eigen::Matrix2d::Zero();
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd x = ps.draw(rng, u);
    sum += x;
    sumsq += x * x.transpose();
  }
  const Eigen::Vector2d mean = sum / N;
  const Eigen::Matrix2d cov = sumsq / N - mean * mean.transpose();
  CHECK((mean - target_mean).cwiseAbs().maxCoeff() < 0.02);
  CHECK((cov - target).cwiseAbs().maxCoeff() < 0.03);
  CHECK((ps.covariance() - target).cwiseAbs().maxCoeff() < 1e-12);
}
