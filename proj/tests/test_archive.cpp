// Chain archive: float64 storage with a text index, state round-trips,
// run-constants, rank trajectory, and config snapshots.
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mvfr/archive.hpp"
#include "mvfr/errors.hpp"

using namespace mvfr;

namespace {

struct TempDir {
  std::string path;
  explicit TempDir(std::string p) : path(std::move(p)) { std::filesystem::remove_all(path); }
  ~TempDir() { std::filesystem::remove_all(path); }
};

MultiviewDataset archive_test_data(Eigen::Index n = 5) {
  RngStream rng(77, {Rv::Test, 20, 0, 0});
  MultiviewDataset d;
  for (Eigen::Index p : {3, 2}) {
    d.views.emplace_back(n, p);
    d.observed.emplace_back(BoolMatrix::Constant(n, p, true));
    d.feature_names.emplace_back();
    for (Eigen::Index j = 0; j < p; ++j) {
      d.feature_names.back().push_back("x" + std::to_string(j));
      for (Eigen::Index i = 0; i < n; ++i) d.views.back()(i, j) = rng.normal();
    }
  }
  d.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.response(i) = rng.normal();
  d.response_observed.assign(static_cast<std::size_t>(n), 1);
  return d;
}

ModelConfig archive_test_config() {
  ModelConfig cfg;
  cfg.K_max = 3;
  cfg.K_m_max = {2, 2};
  cfg.hyper.alpha_shared = {2.0, 2.0};
  cfg.hyper.alpha_specific = {2.0, 2.0};
  cfg.mcmc.iterations = 10;
  cfg.mcmc.burnin = 5;
  return cfg;
}

void check_states_equal(const ModelState& a, const ModelState& b, bool slim) {
  CHECK(a.family == b.family);
  CHECK(a.K == b.K);
  REQUIRE(a.n_views() == b.n_views());
  for (int m = 0; m < a.n_views(); ++m) {
    const auto& va = a.views[static_cast<std::size_t>(m)];
    const auto& vb = b.views[static_cast<std::size_t>(m)];
    CHECK((va.mu - vb.mu).norm() == 0.0);
    CHECK((va.Lambda - vb.Lambda).norm() == 0.0);
    CHECK((va.sigma2 - vb.sigma2).norm() == 0.0);
    CHECK((va.tau2 - vb.tau2).norm() == 0.0);
    CHECK(va.zeta == vb.zeta);
    CHECK((va.nu - vb.nu).norm() == 0.0);
    CHECK((va.Gamma - vb.Gamma).norm() == 0.0);
    CHECK((va.chi2 - vb.chi2).norm() == 0.0);
    CHECK(va.delta == vb.delta);
    CHECK((va.rho - vb.rho).norm() == 0.0);
    if (slim) CHECK(vb.phi.rows() == 0);
    else CHECK((va.phi - vb.phi).norm() == 0.0);
    CHECK((va.theta_m - vb.theta_m).norm() == 0.0);
    CHECK(va.r_m == vb.r_m);
    CHECK((va.psi2_m - vb.psi2_m).norm() == 0.0);
  }
  if (slim) CHECK(b.eta.rows() == 0);
  else CHECK((a.eta - b.eta).norm() == 0.0);
  CHECK(a.mu_y == b.mu_y);
  CHECK((a.theta - b.theta).norm() == 0.0);
  CHECK(a.r == b.r);
  CHECK((a.psi2 - b.psi2).norm() == 0.0);
  CHECK(a.psi2_o == b.psi2_o);
  CHECK(a.sigma2_y == b.sigma2_y);
  CHECK(a.xi == b.xi);
}

}  // namespace

TEST_CASE("state round-trip through the archive is bit-exact") {
  TempDir dir("archive_test_rt");
  const auto data = archive_test_data();
  const auto cfg = archive_test_config();
  const auto s7 = init_state(cfg, data, 101);
  const auto s9 = init_state(cfg, data, 202);

  {
    ArchiveWriter w(dir.path);
    w.manifest()["family"] = to_string(cfg.family);
    w.manifest()["n_views"] = data.n_views();
    w.manifest()["seed"] = 101;
    w.put_state(s7, 7);
    w.put_state(s9, 9);
    w.put_config(model_config_to_tree(cfg));
    w.finish();
  }

  const auto a = ChainArchive::open(dir.path);
  CHECK(a.kept_iterations() == std::vector<std::int64_t>{7, 9});
  CHECK(a.manifest()["seed"] == 101);
  check_states_equal(s7, a.state_at(7), false);
  check_states_equal(s9, a.state_at(9), false);
  // snapshot parses back to the same effective config
  const auto snap = a.config_snapshot();
  CHECK(model_config_to_tree(parse_model_config(snap, 2)) == model_config_to_tree(cfg));
}

TEST_CASE("slim archives drop only the factor scores") {
  TempDir dir("archive_test_slim");
  const auto data = archive_test_data();
  const auto cfg = archive_test_config();
  const auto s = init_state(cfg, data, 303);
  {
    ArchiveWriter w(dir.path);
    w.manifest()["family"] = "jafar";
    w.manifest()["n_views"] = 2;
    w.put_state(s, 6, true);
    w.finish();
  }
  const auto a = ChainArchive::open(dir.path);
  CHECK_FALSE(a.has("eta", 6));
  CHECK_FALSE(a.has("v1/phi", 6));
  CHECK(a.has("v1/Lambda", 6));
  check_states_equal(s, a.state_at(6), true);
}

TEST_CASE("run-constant entries: standardization record") {
  TempDir dir("archive_test_std");
  StandardizationRecord rec;
  rec.mean = {Eigen::VectorXd(2), Eigen::VectorXd(1)};
  rec.sd = {Eigen::VectorXd(2), Eigen::VectorXd(1)};
  rec.mean[0] << 1.5, -2.0;
  rec.sd[0] << 0.5, 3.0;
  rec.mean[1] << 7.0;
  rec.sd[1] << 0.25;
  rec.response_mean = 4.5;
  rec.response_sd = 2.5;
  rec.standardizes_response = true;
  {
    ArchiveWriter w(dir.path);
    w.put_standardization(rec);
    w.finish();
  }
  const auto a = ChainArchive::open(dir.path);
  const auto back = a.standardization();
  REQUIRE(back.mean.size() == 2);
  CHECK((back.mean[0] - rec.mean[0]).norm() == 0.0);
  CHECK((back.sd[1] - rec.sd[1]).norm() == 0.0);
  CHECK(back.response_mean == 4.5);
  CHECK(back.response_sd == 2.5);
  CHECK(back.standardizes_response);
  CHECK(a.kept_iterations().empty());  // run-constants are not states
}

TEST_CASE("rank trajectory CSV round-trip") {
  TempDir dir("archive_test_ranks");
  RankTrajectory rt;
  for (int t = 1; t <= 5; ++t) {
    rt.iteration.push_back(t);
    rt.K.push_back(10 - t);
    rt.K_m.push_back({t, 2 * t, 3});
  }
  {
    ArchiveWriter w(dir.path);
    w.put_ranks(rt);
    w.finish();
  }
  const auto back = ChainArchive::open(dir.path).ranks();
  CHECK(back.iteration == rt.iteration);
  CHECK(back.K == rt.K);
  CHECK(back.K_m == rt.K_m);
}

TEST_CASE("typed getters guard shapes and missing entries") {
  TempDir dir("archive_test_guards");
  {
    ArchiveWriter w(dir.path);
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    w.put_matrix("m", 1, m);
    w.put_scalar("s", 1, 2.5);
    w.finish();
  }
  const auto a = ChainArchive::open(dir.path);
  CHECK(a.scalar("s", 1) == 2.5);
  const auto m = a.matrix("m", 1);
  CHECK(m(1, 2) == 6.0);            // column-major storage survives
  CHECK(a.raw("m", 1)[1] == 4.0);   // ...and is column-major on disk
  CHECK_THROWS_AS(a.scalar("m", 1), DataError);
  CHECK_THROWS_AS(a.matrix("s", 1), DataError);
  CHECK_THROWS_AS(a.raw("m", 2), DataError);       // wrong iteration
  CHECK_THROWS_AS(a.raw("absent", 1), DataError);  // wrong name
  CHECK_THROWS_AS(a.ranks(), DataError);           // no ranks.csv written
  CHECK_THROWS_AS(a.standardization(), DataError);
}

TEST_CASE("malformed archives are rejected") {
  CHECK_THROWS_AS(ChainArchive::open("no_such_archive_dir"), DataError);

  TempDir dir("archive_test_bad");
  std::filesystem::create_directories(dir.path);
  std::ofstream(dir.path + "/manifest.json") << "{\"format\": \"mvfr-archive\"}";
  std::ofstream(dir.path + "/params.idx") << "name_only_line\n";
  std::ofstream(dir.path + "/params.bin") << "";
  CHECK_THROWS_AS(ChainArchive::open(dir.path), DataError);

  std::ofstream(dir.path + "/params.idx") << "a 1 2x2 0 3\n";  // dims/count mismatch
  CHECK_THROWS_AS(ChainArchive::open(dir.path), DataError);

  std::ofstream(dir.path + "/params.idx") << "a 1 4 0 4\n";  // count exceeds the bin
  const auto a = ChainArchive::open(dir.path);
  CHECK_THROWS_AS(a.raw("a", 1), DataError);  // truncated read

  std::ofstream(dir.path + "/manifest.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(ChainArchive::open(dir.path), DataError);
}

TEST_CASE("writer rejects malformed puts") {
  TempDir dir("archive_test_wbad");
  ArchiveWriter w(dir.path);
  const double x = 1.0;
  CHECK_THROWS_AS(w.put("bad name", 1, {1}, &x, 1), DataError);
  CHECK_THROWS_AS(w.put("shape", 1, {2, 3}, &x, 1), DataError);
  w.finish();
  CHECK_THROWS_AS(w.put_scalar("late", 1, 2.0), DataError);
}
