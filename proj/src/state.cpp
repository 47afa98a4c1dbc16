#include "mvfr/state.hpp"

#include <cmath>
#include <string>

#include "mvfr/errors.hpp"

namespace mvfr {

namespace {

// prior center used at initialization: the mean when it exists, else the b/a scale
double inv_gamma_center(double a, double b) { return a > 1.0 ? b / (a - 1.0) : b / a; }

void check(bool ok, const std::string& what) {
  if (!ok) throw NumericalError("model state invariant violated: " + what);
}

void draw_indicators(std::vector<int>& out, const Eigen::VectorXd& nu, RngStream& rng) {
  const Eigen::VectorXd logw = stick_log_weights(nu);
  out.resize(static_cast<std::size_t>(nu.size()));
  for (auto& z : out) z = static_cast<int>(rng.categorical_log(logw)) + 1;  // 1-based
}

}  // namespace

int ModelState::total_rank() const {
  int total = K;
  for (const auto& v : views) total += v.K_m();
  return total;
}

int shared_activity_count(const ModelState& s, int h) {
  int count = 0;
  for (const auto& v : s.views) count += shared_active(v, h) ? 1 : 0;
  return count;
}

Eigen::VectorXd stick_log_weights(const Eigen::VectorXd& nu) {
  Eigen::VectorXd logw(nu.size());
  double acc = 0.0;  // sum of log(1 - nu_l) over sticks before h
  for (Eigen::Index h = 0; h < nu.size(); ++h) {
    logw(h) = std::log(nu(h)) + acc;
    acc += std::log1p(-nu(h));
  }
  return logw;
}

void ModelState::validate(const HyperParams& hyper, const ModelConfig* cfg) const {
  check(!views.empty(), "no views");
  check(K >= 1, "shared rank below one");
  const Eigen::Index rows = eta.rows();
  check(eta.cols() == K, "eta width != K");
  for (std::size_t m = 0; m < views.size(); ++m) {
    const auto& v = views[m];
    const std::string tag = "view " + std::to_string(m + 1) + " ";
    check(v.Lambda.rows() == v.p() && v.Lambda.cols() == K, tag + "Lambda shape");
    check(v.sigma2.size() == v.p(), tag + "sigma2 length");
    check((v.sigma2.array() > 0.0).all(), tag + "sigma2 positivity");
    check(v.tau2.size() == K, tag + "tau2 length");
    check(v.zeta.size() == static_cast<std::size_t>(K), tag + "zeta length");
    check(v.nu.size() == K, tag + "nu length");
    check(v.nu(K - 1) == 1.0, tag + "last stick not pinned");
    for (int h = 0; h < K; ++h) {
      check(v.zeta[static_cast<std::size_t>(h)] >= 1 &&
                v.zeta[static_cast<std::size_t>(h)] <= K,
            tag + "zeta range");
      check(v.nu(h) >= 0.0 && v.nu(h) <= 1.0, tag + "stick range");
      if (shared_active(v, h))
        check(v.tau2(h) > 0.0, tag + "active tau2 positivity");
      else
        check(v.tau2(h) == hyper.tau2_inf, tag + "inactive tau2 must sit at the spike");
    }
    const int km = v.K_m();
    check(v.Gamma.rows() == (km > 0 ? v.p() : 0) || km == 0, tag + "Gamma shape");
    check(v.chi2.size() == km, tag + "chi2 length");
    check(v.delta.size() == static_cast<std::size_t>(km), tag + "delta length");
    check(v.rho.size() == km, tag + "rho length");
    check(v.phi.rows() == (km > 0 ? rows : v.phi.rows()) && v.phi.cols() == km,
          tag + "phi shape");
    check(v.theta_m.size() == km, tag + "theta_m length");
    check(v.r_m.size() == static_cast<std::size_t>(km), tag + "r_m length");
    check(v.psi2_m.size() == km, tag + "psi2_m length");
    if (km > 0) {
      check(v.Gamma.rows() == v.p(), tag + "Gamma rows");
      check(v.rho(km - 1) == 1.0, tag + "last specific stick not pinned");
    }
    for (int h = 0; h < km; ++h) {
      check(v.delta[static_cast<std::size_t>(h)] >= 1 &&
                v.delta[static_cast<std::size_t>(h)] <= km,
            tag + "delta range");
      if (specific_active(v, h))
        check(v.chi2(h) > 0.0, tag + "active chi2 positivity");
      else
        check(v.chi2(h) == hyper.tau2_inf, tag + "inactive chi2 must sit at the spike");
      if (v.r_m[static_cast<std::size_t>(h)])
        check(v.psi2_m(h) == psi2_o, tag + "active psi2_m must equal the slab value");
      else
        check(v.psi2_m(h) == hyper.psi2_inf, tag + "inactive psi2_m must sit at the spike");
    }
  }
  check(theta.size() == K && r.size() == static_cast<std::size_t>(K) && psi2.size() == K,
        "response block length");
  for (int h = 0; h < K; ++h) {
    if (r[static_cast<std::size_t>(h)])
      check(psi2(h) == psi2_o, "active psi2 must equal the slab value");
    else
      check(psi2(h) == hyper.psi2_inf, "inactive psi2 must sit at the spike");
  }
  check(sigma2_y > 0.0, "sigma2_y positivity");
  check(psi2_o > 0.0, "psi2_o positivity");
  check(xi >= 0.0 && xi <= 1.0, "xi range");
  if (cfg) {
    check(family == cfg->family, "family mismatch");
    check(K <= cfg->K_max, "shared rank above its bound");
    for (std::size_t m = 0; m < views.size(); ++m) {
      if (cfg->family == Family::JFR)
        check(views[m].K_m() == 0, "jfr state must have no specific block");
      else
        check(views[m].K_m() <= cfg->K_m_max[m], "specific rank above its bound");
    }
  }
}

Eigen::MatrixXd stacked_loadings(const ModelState& s, int m) {
  const auto& v = s.views[static_cast<std::size_t>(m)];
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.p(), s.total_rank());
  out.leftCols(s.K) = v.Lambda;
  Eigen::Index off = s.K;
  for (int mm = 0; mm < s.n_views(); ++mm) {
    const int km = s.views[static_cast<std::size_t>(mm)].K_m();
    if (mm == m && km > 0) out.middleCols(off, km) = v.Gamma;
    off += km;
  }
  return out;
}

Eigen::MatrixXd stacked_factors(const ModelState& s) {
  Eigen::MatrixXd out(s.eta.rows(), s.total_rank());
  out.leftCols(s.K) = s.eta;
  Eigen::Index off = s.K;
  for (const auto& v : s.views) {
    if (v.K_m() > 0) out.middleCols(off, v.K_m()) = v.phi;
    off += v.K_m();
  }
  return out;
}

Eigen::VectorXd stacked_response_coefs(const ModelState& s) {
  Eigen::VectorXd out(s.total_rank());
  out.head(s.K) = s.theta;
  Eigen::Index off = s.K;
  for (const auto& v : s.views) {
    if (v.K_m() > 0) out.segment(off, v.K_m()) = v.theta_m;
    off += v.K_m();
  }
  return out;
}

ModelState init_state(const ModelConfig& cfg, const MultiviewDataset& data_z,
                      std::uint64_t seed) {
  const int M = data_z.n_views();
  cfg.validate(M);
  data_z.validate(cfg.supervised);
  const Eigen::Index n = data_z.n();

  ModelState s;
  s.family = cfg.family;
  s.K = cfg.K_max;
  s.views.resize(static_cast<std::size_t>(M));

  const double sd0 = 0.1;  // N(0, 0.01) for loadings, factors, coefficients
  const double sigma2_init = inv_gamma_center(cfg.hyper.a_sigma, cfg.hyper.b_sigma);
  const double slab_tau2 = cfg.hyper.b_L / cfg.hyper.a_L;

  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const Eigen::Index p = data_z.p(m);
    RngStream rng(seed, {Rv::Init, m, 0, 0});

    v.mu.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      double sum = 0.0;
      Eigen::Index cnt = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (data_z.observed[static_cast<std::size_t>(m)](i, j)) {
          sum += data_z.views[static_cast<std::size_t>(m)](i, j);
          ++cnt;
        }
      v.mu(j) = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
    }
    v.sigma2 = Eigen::VectorXd::Constant(p, sigma2_init);

    v.nu.resize(s.K);
    for (int h = 0; h + 1 < s.K; ++h)
      v.nu(h) = rng.beta(1.0, cfg.hyper.alpha_shared[static_cast<std::size_t>(m)]);
    v.nu(s.K - 1) = 1.0;
    draw_indicators(v.zeta, v.nu, rng);
    v.tau2.resize(s.K);
    for (int h = 0; h < s.K; ++h)
      v.tau2(h) = shared_active(v, h) ? slab_tau2 : cfg.hyper.tau2_inf;
    v.Lambda.resize(p, s.K);
    for (Eigen::Index j = 0; j < p; ++j)
      for (int h = 0; h < s.K; ++h) v.Lambda(j, h) = sd0 * rng.normal();

    const int km = cfg.family == Family::JAFAR ? cfg.K_m_max[static_cast<std::size_t>(m)] : 0;
    v.rho.resize(km);
    v.chi2.resize(km);
    v.theta_m.resize(km);
    v.psi2_m.resize(km);
    v.Gamma.resize(km > 0 ? p : 0, km);
    v.phi.resize(km > 0 ? n : 0, km);
    if (km > 0) {
      for (int h = 0; h + 1 < km; ++h)
        v.rho(h) = rng.beta(1.0, cfg.hyper.alpha_specific[static_cast<std::size_t>(m)]);
      v.rho(km - 1) = 1.0;
      draw_indicators(v.delta, v.rho, rng);
      for (int h = 0; h < km; ++h)
        v.chi2(h) = specific_active(v, h) ? slab_tau2 : cfg.hyper.tau2_inf;
      for (Eigen::Index j = 0; j < p; ++j)
        for (int h = 0; h < km; ++h) v.Gamma(j, h) = sd0 * rng.normal();
      for (Eigen::Index i = 0; i < n; ++i)
        for (int h = 0; h < km; ++h) v.phi(i, h) = sd0 * rng.normal();
    }
  }

  RngStream rng(seed, {Rv::Init, -1, 0, 0});
  s.eta.resize(n, s.K);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int h = 0; h < s.K; ++h) s.eta(i, h) = sd0 * rng.normal();

  if (data_z.has_response()) {
    double sum = 0.0;
    Eigen::Index cnt = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (data_z.response_observed[static_cast<std::size_t>(i)]) {
        sum += data_z.response(i);
        ++cnt;
      }
    s.mu_y = cnt > 0 ? sum / static_cast<double>(cnt) : 0.0;
  }
  s.sigma2_y = sigma2_init;
  s.xi = cfg.hyper.a_xi / (cfg.hyper.a_xi + cfg.hyper.b_xi);
  s.psi2_o = inv_gamma_center(cfg.hyper.a_theta, cfg.hyper.b_theta);

  s.theta.resize(s.K);
  s.r.resize(static_cast<std::size_t>(s.K));
  s.psi2.resize(s.K);
  for (int h = 0; h < s.K; ++h) {
    s.theta(h) = sd0 * rng.normal();
    s.r[static_cast<std::size_t>(h)] = rng.bernoulli(s.xi) ? 1 : 0;
    s.psi2(h) = s.r[static_cast<std::size_t>(h)] ? s.psi2_o : cfg.hyper.psi2_inf;
  }
  for (auto& v : s.views) {
    const int km = v.K_m();
    for (int h = 0; h < km; ++h) {
      v.theta_m(h) = sd0 * rng.normal();
      v.r_m.push_back(rng.bernoulli(s.xi) ? 1 : 0);
      v.psi2_m(h) = v.r_m.back() ? s.psi2_o : cfg.hyper.psi2_inf;
    }
  }

  s.validate(cfg.hyper, &cfg);
  return s;
}

}  // namespace mvfr
