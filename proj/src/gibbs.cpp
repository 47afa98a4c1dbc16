#include "mvfr/gibbs.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mvfr/errors.hpp"
#include "mvfr/stats.hpp"

namespace mvfr {

namespace {

// Subjects sharing an observation pattern (per-view observed-feature sets, plus
// the response bit) share one factor-update precision; complete data collapses
// to a single group.
struct PatternGroup {
  std::vector<Eigen::Index> subjects;
  std::vector<std::vector<Eigen::Index>> obs;  // per view: observed feature ids
  bool has_y = false;
};

std::vector<Eigen::Index> all_indices(Eigen::Index count) {
  std::vector<Eigen::Index> ids(static_cast<std::size_t>(count));
  std::iota(ids.begin(), ids.end(), Eigen::Index{0});
  return ids;
}

std::vector<PatternGroup> group_by_pattern(const MultiviewDataset& d) {
  const int M = d.n_views();
  const Eigen::Index n = d.n();
  bool complete = !d.has_response() || d.response_complete();
  for (int m = 0; m < M && complete; ++m) complete = d.observed[static_cast<std::size_t>(m)].all();
  if (complete) {
    PatternGroup g;
    g.subjects = all_indices(n);
    g.obs.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) g.obs.push_back(all_indices(d.p(m)));
    g.has_y = d.has_response();
    return {std::move(g)};
  }
  std::vector<PatternGroup> out;
  std::map<std::string, std::size_t> slot;
  std::string key;
  for (Eigen::Index i = 0; i < n; ++i) {
    key.clear();
    for (int m = 0; m < M; ++m) {
      const auto& mask = d.observed[static_cast<std::size_t>(m)];
      for (Eigen::Index j = 0; j < d.p(m); ++j) key.push_back(mask(i, j) ? '1' : '0');
    }
    const bool has_y = d.has_response() && d.response_observed[static_cast<std::size_t>(i)] != 0;
    key.push_back(has_y ? 'y' : '.');
    auto [it, fresh] = slot.try_emplace(key, out.size());
    if (fresh) {
      PatternGroup g;
      g.has_y = has_y;
      g.obs.resize(static_cast<std::size_t>(M));
      std::size_t pos = 0;
      for (int m = 0; m < M; ++m) {
        for (Eigen::Index j = 0; j < d.p(m); ++j, ++pos)
          if (key[pos] == '1') g.obs[static_cast<std::size_t>(m)].push_back(j);
      }
      out.push_back(std::move(g));
    }
    out[it->second].subjects.push_back(i);
  }
  return out;
}

// Cholesky with the one-shot jitter retry used by every conditional draw.
PrecisionSolver solve_precision(Eigen::MatrixXd& precision) {
  try {
    return PrecisionSolver(precision);
  } catch (const NumericalError&) {
    precision.diagonal().array() += 1e-10;
    return PrecisionSolver(precision);
  }
}

// Runs `body(j)` over 0..count-1, data-parallel, surfacing the first exception.
template <typename Body>
void parallel_for(Eigen::Index count, const Body& body) {
  std::atomic<bool> failed{false};
  std::exception_ptr error = nullptr;
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < count; ++j) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      body(j);
    } catch (...) {
#pragma omp critical(mvfr_parallel_error)
      {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

double clamp_unit(double p) { return std::min(1.0 - 1e-12, std::max(1e-12, p)); }

}  // namespace

void update_loadings_rows(ModelState& s, const MultiviewDataset& data_z,
                          const HyperParams& hyper, const SweepContext& ctx) {
  const int K = s.K;
  for (int m = 0; m < s.n_views(); ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const int Km = v.K_m();
    const Eigen::Index p = v.p();
    const Eigen::Index n = s.n();
    const Eigen::Index w = 1 + K + Km;
    const auto& X = data_z.views[static_cast<std::size_t>(m)];
    const auto& mask = data_z.observed[static_cast<std::size_t>(m)];

    Eigen::MatrixXd Z(n, w);
    Z.col(0).setOnes();
    Z.middleCols(1, K) = s.eta;
    if (Km > 0) Z.rightCols(Km) = v.phi;

    Eigen::VectorXd prior_inv(w);
    prior_inv(0) = 1.0 / hyper.upsilon2;
    prior_inv.segment(1, K) = v.tau2.cwiseInverse();
    if (Km > 0) prior_inv.tail(Km) = v.chi2.cwiseInverse();

    const bool view_complete = mask.all();
    Eigen::MatrixXd G, U;
    if (view_complete) {
      G.noalias() = Z.transpose() * Z;
      U.noalias() = Z.transpose() * X;
    }

    Eigen::MatrixXd new_rows(p, w);
    parallel_for(p, [&](Eigen::Index j) {
      const double inv_s2 = 1.0 / v.sigma2(j);
      Eigen::MatrixXd P = Eigen::MatrixXd(prior_inv.asDiagonal());
      Eigen::VectorXd u = Eigen::VectorXd::Zero(w);
      if (view_complete) {
        P.noalias() += inv_s2 * G;
        u.noalias() = inv_s2 * U.col(j);
      } else {
        Eigen::Index q = 0;
        for (Eigen::Index i = 0; i < n; ++i) q += mask(i, j) ? 1 : 0;
        if (q > 0) {
          Eigen::MatrixXd Zo(q, w);
          Eigen::VectorXd xo(q);
          Eigen::Index t = 0;
          for (Eigen::Index i = 0; i < n; ++i) {
            if (!mask(i, j)) continue;
            Zo.row(t) = Z.row(i);
            xo(t) = X(i, j);
            ++t;
          }
          P.noalias() += inv_s2 * (Zo.transpose() * Zo);
          u.noalias() = inv_s2 * (Zo.transpose() * xo);
        }
      }
      PrecisionSolver solver = solve_precision(P);
      RngStream rng(ctx.seed, {Rv::LoadingsRow, m, j, ctx.iteration});
      new_rows.row(j) = solver.draw(rng, u);
    });

    v.mu = new_rows.col(0);
    v.Lambda = new_rows.middleCols(1, K);
    if (Km > 0) v.Gamma = new_rows.rightCols(Km);
  }
}

void update_response_coefs(ModelState& s, const MultiviewDataset& data_z,
                           const HyperParams& hyper, const SweepContext& ctx) {
  const int Kt = s.total_rank();
  const Eigen::Index w = 1 + Kt;
  const Eigen::Index n = s.n();
  const Eigen::MatrixXd F = stacked_factors(s);

  Eigen::VectorXd prior_inv(w);
  prior_inv(0) = 1.0 / hyper.upsilon2_y;
  prior_inv.segment(1, s.K) = s.psi2.cwiseInverse();
  Eigen::Index at = 1 + s.K;
  for (const auto& v : s.views) {
    if (v.K_m() > 0) prior_inv.segment(at, v.K_m()) = v.psi2_m.cwiseInverse();
    at += v.K_m();
  }

  const double inv_sy2 = 1.0 / s.sigma2_y;
  Eigen::MatrixXd P = Eigen::MatrixXd(prior_inv.asDiagonal());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(w);
  Eigen::Index q = 0;
  for (Eigen::Index i = 0; i < n; ++i) q += data_z.response_observed[static_cast<std::size_t>(i)] ? 1 : 0;
  if (q > 0) {
    Eigen::MatrixXd Zo(q, w);
    Eigen::VectorXd yo(q);
    Eigen::Index t = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!data_z.response_observed[static_cast<std::size_t>(i)]) continue;
      Zo(t, 0) = 1.0;
      Zo.row(t).segment(1, Kt) = F.row(i);
      yo(t) = data_z.response(i);
      ++t;
    }
    P.noalias() += inv_sy2 * (Zo.transpose() * Zo);
    u.noalias() = inv_sy2 * (Zo.transpose() * yo);
  }
  PrecisionSolver solver = solve_precision(P);
  RngStream rng(ctx.seed, {Rv::ResponseCoefs, -1, 0, ctx.iteration});
  const Eigen::VectorXd draw = solver.draw(rng, u);

  s.mu_y = draw(0);
  s.theta = draw.segment(1, s.K);
  at = 1 + s.K;
  for (auto& v : s.views) {
    if (v.K_m() > 0) v.theta_m = draw.segment(at, v.K_m());
    at += v.K_m();
  }
}

void update_variances(ModelState& s, const MultiviewDataset& data_z,
                      const HyperParams& hyper, bool supervised, const SweepContext& ctx) {
  const Eigen::Index n = s.n();
  for (int m = 0; m < s.n_views(); ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const auto& X = data_z.views[static_cast<std::size_t>(m)];
    const auto& mask = data_z.observed[static_cast<std::size_t>(m)];
    Eigen::MatrixXd R = X;
    R.noalias() -= s.eta * v.Lambda.transpose();
    if (v.K_m() > 0) R.noalias() -= v.phi * v.Gamma.transpose();
    R.rowwise() -= v.mu.transpose();
    for (Eigen::Index j = 0; j < v.p(); ++j) {
      double d = 0.0;
      Eigen::Index c = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!mask(i, j)) continue;
        d += R(i, j) * R(i, j);
        ++c;
      }
      RngStream rng(ctx.seed, {Rv::IdioVar, m, j, ctx.iteration});
      v.sigma2(j) = rng.inverse_gamma(hyper.a_sigma + 0.5 * static_cast<double>(c),
                                      hyper.b_sigma + 0.5 * d);
    }
  }
  if (supervised) {
    const Eigen::VectorXd fit = stacked_factors(s) * stacked_response_coefs(s);
    double d = 0.0;
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!data_z.response_observed[static_cast<std::size_t>(i)]) continue;
      const double e = data_z.response(i) - s.mu_y - fit(i);
      d += e * e;
      ++c;
    }
    RngStream rng(ctx.seed, {Rv::ResponseVar, -1, 0, ctx.iteration});
    s.sigma2_y = rng.inverse_gamma(hyper.a_sigma + 0.5 * static_cast<double>(c),
                                   hyper.b_sigma + 0.5 * d);
  }
}

void update_factors_supervised(ModelState& s, const MultiviewDataset& data_z,
                               const SweepContext& ctx) {
  const int M = s.n_views();
  const int K = s.K;
  const int Kt = s.total_rank();
  std::vector<int> off(static_cast<std::size_t>(M));
  {
    int acc = K;
    for (int m = 0; m < M; ++m) {
      off[static_cast<std::size_t>(m)] = acc;
      acc += s.views[static_cast<std::size_t>(m)].K_m();
    }
  }
  const Eigen::VectorXd coefs = stacked_response_coefs(s);
  const double inv_sy2 = 1.0 / s.sigma2_y;

  for (const auto& g : group_by_pattern(data_z)) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(Kt, Kt);
    if (g.has_y) A.noalias() += inv_sy2 * (coefs * coefs.transpose());
    std::vector<Eigen::MatrixXd> W(static_cast<std::size_t>(M));
    std::vector<Eigen::VectorXd> wv(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
      const auto& v = s.views[static_cast<std::size_t>(m)];
      const auto& ids = g.obs[static_cast<std::size_t>(m)];
      const Eigen::Index q = static_cast<Eigen::Index>(ids.size());
      const int Km = v.K_m();
      Eigen::MatrixXd Wm(q, K + Km);
      Eigen::VectorXd wm(q);
      for (Eigen::Index t = 0; t < q; ++t) {
        const Eigen::Index j = ids[static_cast<std::size_t>(t)];
        Wm.row(t).head(K) = v.Lambda.row(j);
        if (Km > 0) Wm.row(t).tail(Km) = v.Gamma.row(j);
        wm(t) = 1.0 / v.sigma2(j);
      }
      const Eigen::MatrixXd G = Wm.transpose() * (wm.asDiagonal() * Wm);
      A.block(0, 0, K, K) += G.topLeftCorner(K, K);
      if (Km > 0) {
        const int o = off[static_cast<std::size_t>(m)];
        A.block(0, o, K, Km) += G.topRightCorner(K, Km);
        A.block(o, 0, Km, K) += G.bottomLeftCorner(Km, K);
        A.block(o, o, Km, Km) += G.bottomRightCorner(Km, Km);
      }
      W[static_cast<std::size_t>(m)] = std::move(Wm);
      wv[static_cast<std::size_t>(m)] = std::move(wm);
    }
    const PrecisionSolver solver = solve_precision(A);

    const Eigen::Index count = static_cast<Eigen::Index>(g.subjects.size());
    parallel_for(count, [&](Eigen::Index t) {
      const Eigen::Index i = g.subjects[static_cast<std::size_t>(t)];
      Eigen::VectorXd u = Eigen::VectorXd::Zero(Kt);
      if (g.has_y) u.noalias() += (inv_sy2 * (data_z.response(i) - s.mu_y)) * coefs;
      for (int m = 0; m < M; ++m) {
        const auto& v = s.views[static_cast<std::size_t>(m)];
        const auto& ids = g.obs[static_cast<std::size_t>(m)];
        const auto& X = data_z.views[static_cast<std::size_t>(m)];
        const Eigen::Index q = static_cast<Eigen::Index>(ids.size());
        Eigen::VectorXd val(q);
        for (Eigen::Index tt = 0; tt < q; ++tt) {
          const Eigen::Index j = ids[static_cast<std::size_t>(tt)];
          val(tt) = wv[static_cast<std::size_t>(m)](tt) * (X(i, j) - v.mu(j));
        }
        const Eigen::VectorXd tvec = W[static_cast<std::size_t>(m)].transpose() * val;
        u.head(K) += tvec.head(K);
        if (v.K_m() > 0) u.segment(off[static_cast<std::size_t>(m)], v.K_m()) += tvec.tail(v.K_m());
      }
      RngStream rng(ctx.seed, {Rv::Factor, -1, i, ctx.iteration});
      const Eigen::VectorXd draw = solver.draw(rng, u);
      s.eta.row(i) = draw.head(K);
      for (int m = 0; m < M; ++m) {
        auto& v = s.views[static_cast<std::size_t>(m)];
        if (v.K_m() > 0) v.phi.row(i) = draw.segment(off[static_cast<std::size_t>(m)], v.K_m());
      }
    });
  }
}

void update_factors_collapsed(ModelState& s, const MultiviewDataset& data_z,
                              const SweepContext& ctx) {
  const int M = s.n_views();
  const int K = s.K;

  for (const auto& g : group_by_pattern(data_z)) {
    // per-view pieces of the specific-factors-integrated conditional
    std::vector<Eigen::MatrixXd> WL(static_cast<std::size_t>(M)), WG(static_cast<std::size_t>(M));
    std::vector<Eigen::VectorXd> wv(static_cast<std::size_t>(M));
    std::vector<Eigen::MatrixXd> proj(static_cast<std::size_t>(M));  // S^{-1} (Gamma' D^{-1} Lambda)
    std::vector<Eigen::LLT<Eigen::MatrixXd>> Sfac(static_cast<std::size_t>(M));
    std::vector<Eigen::MatrixXd> Smat(static_cast<std::size_t>(M));
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(K, K);
    for (int m = 0; m < M; ++m) {
      const auto& v = s.views[static_cast<std::size_t>(m)];
      const auto& ids = g.obs[static_cast<std::size_t>(m)];
      const Eigen::Index q = static_cast<Eigen::Index>(ids.size());
      const int Km = v.K_m();
      Eigen::MatrixXd L(q, K), Gm(q, Km);
      Eigen::VectorXd wm(q);
      for (Eigen::Index t = 0; t < q; ++t) {
        const Eigen::Index j = ids[static_cast<std::size_t>(t)];
        L.row(t) = v.Lambda.row(j);
        if (Km > 0) Gm.row(t) = v.Gamma.row(j);
        wm(t) = 1.0 / v.sigma2(j);
      }
      const Eigen::MatrixXd BLL = L.transpose() * (wm.asDiagonal() * L);
      if (Km > 0) {
        Eigen::MatrixXd S = Eigen::MatrixXd::Identity(Km, Km);
        S.noalias() += Gm.transpose() * (wm.asDiagonal() * Gm);
        const Eigen::MatrixXd BGL = Gm.transpose() * (wm.asDiagonal() * L);
        Smat[static_cast<std::size_t>(m)] = S;
        Sfac[static_cast<std::size_t>(m)].compute(S);
        if (Sfac[static_cast<std::size_t>(m)].info() != Eigen::Success)
          throw NumericalError("collapsed factor update: specific-block factorization failed");
        proj[static_cast<std::size_t>(m)] = Sfac[static_cast<std::size_t>(m)].solve(BGL);
        A += BLL - BGL.transpose() * proj[static_cast<std::size_t>(m)];
      } else {
        A += BLL;
      }
      WL[static_cast<std::size_t>(m)] = std::move(L);
      WG[static_cast<std::size_t>(m)] = std::move(Gm);
      wv[static_cast<std::size_t>(m)] = std::move(wm);
    }
    const PrecisionSolver solver = solve_precision(A);

    const Eigen::Index count = static_cast<Eigen::Index>(g.subjects.size());
    parallel_for(count, [&](Eigen::Index t) {
      const Eigen::Index i = g.subjects[static_cast<std::size_t>(t)];
      Eigen::VectorXd u = Eigen::VectorXd::Zero(K);
      for (int m = 0; m < M; ++m) {
        const auto& v = s.views[static_cast<std::size_t>(m)];
        const auto& ids = g.obs[static_cast<std::size_t>(m)];
        const auto& X = data_z.views[static_cast<std::size_t>(m)];
        const Eigen::Index q = static_cast<Eigen::Index>(ids.size());
        Eigen::VectorXd val(q);
        for (Eigen::Index tt = 0; tt < q; ++tt) {
          const Eigen::Index j = ids[static_cast<std::size_t>(tt)];
          val(tt) = wv[static_cast<std::size_t>(m)](tt) * (X(i, j) - v.mu(j));
        }
        const Eigen::VectorXd tvec = WL[static_cast<std::size_t>(m)].transpose() * val;
        u.head(K) += tvec.head(K);
        if (v.K_m() > 0) {
          const Eigen::VectorXd tg = WG[static_cast<std::size_t>(m)].transpose() * val;
          u.noalias() -= proj[static_cast<std::size_t>(m)].transpose() * tg;
        }
      }
      RngStream rng(ctx.seed, {Rv::Factor, -1, i, ctx.iteration});
      s.eta.row(i) = solver.draw(rng, u);
    });

    for (int m = 0; m < M; ++m) {
      auto& v = s.views[static_cast<std::size_t>(m)];
      const int Km = v.K_m();
      if (Km == 0) continue;
      Eigen::MatrixXd Pm = Smat[static_cast<std::size_t>(m)];
      const PrecisionSolver sm = solve_precision(Pm);
      const auto& ids = g.obs[static_cast<std::size_t>(m)];
      const auto& X = data_z.views[static_cast<std::size_t>(m)];
      const Eigen::Index q = static_cast<Eigen::Index>(ids.size());
      parallel_for(count, [&](Eigen::Index t) {
        const Eigen::Index i = g.subjects[static_cast<std::size_t>(t)];
        Eigen::VectorXd val(q);
        for (Eigen::Index tt = 0; tt < q; ++tt) {
          const Eigen::Index j = ids[static_cast<std::size_t>(tt)];
          val(tt) = wv[static_cast<std::size_t>(m)](tt) *
                    (X(i, j) - v.mu(j) - WL[static_cast<std::size_t>(m)].row(tt).dot(s.eta.row(i)));
        }
        const Eigen::VectorXd um = WG[static_cast<std::size_t>(m)].transpose() * val;
        RngStream rng(ctx.seed, {Rv::Factor, m, i, ctx.iteration});
        v.phi.row(i) = sm.draw(rng, um);
      });
    }
  }
}

Eigen::Index effective_view_subjects(const MultiviewDataset& data_z, int m) {
  const auto& mask = data_z.observed[static_cast<std::size_t>(m)];
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    if (mask.row(i).any()) ++count;
  return count;
}

double membership_temperature(const MultiviewDataset& data_z, int m) {
  const double p = static_cast<double>(data_z.p(m));
  const double n_eff = static_cast<double>(effective_view_subjects(data_z, m));
  return std::min(n_eff, p) / p;
}

Eigen::MatrixXd fulld_activation_probabilities(const ModelState& s) {
  const int M = s.n_views();
  const int K = s.K;
  Eigen::MatrixXd slab_mass(M, K);  // prior P[column h slab in view m] from the sticks
  for (int m = 0; m < M; ++m) {
    const Eigen::VectorXd w = stick_log_weights(s.views[static_cast<std::size_t>(m)].nu).array().exp();
    double tail = 0.0;
    for (int h = K - 1; h >= 0; --h) {
      slab_mass(m, h) = tail;  // mass of labels strictly above position h
      tail += w(h);
    }
  }
  Eigen::MatrixXd pi(M, K);
  for (int h = 0; h < K; ++h) {
    for (int m = 0; m < M; ++m) {
      double others_all_spike = 1.0;
      for (int mm = 0; mm < M; ++mm)
        if (mm != m) others_all_spike *= 1.0 - slab_mass(mm, h);
      pi(m, h) = slab_mass(m, h) * (1.0 - others_all_spike);
    }
  }
  return pi;
}

namespace {

// One stick-breaking membership column draw, collapsed over its slab variance.
// The slab-vs-spike log-likelihood gap enters through the temperature; a
// temperature of exactly 1 multiplies by 1.0 and is bit-neutral.
int draw_membership(RngStream& rng, const Eigen::VectorXd& logw, int h, double delta_log,
                    double temperature, const double* fulld_pi, const double* fulld_mass) {
  const Eigen::Index K = logw.size();
  Eigen::VectorXd logp = logw;
  if (fulld_pi) {
    const double pi = clamp_unit(*fulld_pi);
    const double mass = clamp_unit(*fulld_mass);
    const double slab_adj = std::log(pi) - std::log(mass);
    const double spike_adj = std::log1p(-pi) - std::log1p(-mass);
    for (Eigen::Index l = 0; l < K; ++l) logp(l) += l > h ? slab_adj : spike_adj;
  }
  for (Eigen::Index l = h + 1; l < K; ++l) logp(l) += temperature * delta_log;
  return 1 + rng.categorical_log(logp);
}

}  // namespace

void update_memberships(ModelState& s, const MultiviewDataset& data_z,
                        const HyperParams& hyper, PriorVariant variant,
                        bool tempering, bool supervised, const SweepContext& ctx) {
  const int M = s.n_views();
  const int K = s.K;
  const double slab_df = 2.0 * hyper.a_L;
  const double slab_scale = hyper.b_L / hyper.a_L;

  Eigen::MatrixXd fulld_pi, fulld_mass;
  if (variant == PriorVariant::FULLD) {
    fulld_pi = fulld_activation_probabilities(s);
    fulld_mass.resize(M, K);
    for (int m = 0; m < M; ++m) {
      const Eigen::VectorXd w =
          stick_log_weights(s.views[static_cast<std::size_t>(m)].nu).array().exp();
      double tail = 0.0;
      for (int h = K - 1; h >= 0; --h) {
        fulld_mass(m, h) = tail;
        tail += w(h);
      }
    }
  }

  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const double temperature = tempering ? membership_temperature(data_z, m) : 1.0;
    const Eigen::Index p = v.p();

    const Eigen::VectorXd logw = stick_log_weights(v.nu);
    for (int h = 0; h < K; ++h) {
      const double sq = v.Lambda.col(h).squaredNorm();
      const double delta_log = logpdf_mvt_iso_sq(sq, p, slab_df, slab_scale) -
                               logpdf_normal_iso_sq(sq, p, hyper.tau2_inf);
      RngStream rng(ctx.seed, {Rv::Membership, m, h, ctx.iteration});
      const double* pi = variant == PriorVariant::FULLD ? &fulld_pi(m, h) : nullptr;
      const double* mass = variant == PriorVariant::FULLD ? &fulld_mass(m, h) : nullptr;
      v.zeta[static_cast<std::size_t>(h)] =
          draw_membership(rng, logw, h, delta_log, temperature, pi, mass);
    }

    const int Km = v.K_m();
    if (Km > 0) {
      const Eigen::VectorXd logw_s = stick_log_weights(v.rho);
      for (int h = 0; h < Km; ++h) {
        const double sq = v.Gamma.col(h).squaredNorm();
        const double delta_log = logpdf_mvt_iso_sq(sq, p, slab_df, slab_scale) -
                                 logpdf_normal_iso_sq(sq, p, hyper.tau2_inf);
        RngStream rng(ctx.seed, {Rv::MembershipSpecific, m, h, ctx.iteration});
        v.delta[static_cast<std::size_t>(h)] =
            draw_membership(rng, logw_s, h, delta_log, temperature, nullptr, nullptr);
      }
    }
  }

  if (!supervised) return;

  // Activation bits with the common slab variance integrated out given the other
  // active coefficients; sequential scan so each bit sees the fresh ones.
  double n_active = 0.0, sq_active = 0.0;
  for (int h = 0; h < K; ++h)
    if (s.r[static_cast<std::size_t>(h)]) {
      n_active += 1.0;
      sq_active += s.theta(h) * s.theta(h);
    }
  for (const auto& v : s.views)
    for (int h = 0; h < v.K_m(); ++h)
      if (v.r_m[static_cast<std::size_t>(h)]) {
        n_active += 1.0;
        sq_active += v.theta_m(h) * v.theta_m(h);
      }

  const double xi = clamp_unit(s.xi);
  const double prior_logit = std::log(xi) - std::log1p(-xi);
  auto draw_bit = [&](double coef, char& bit, StreamLabel label) {
    const double sq = coef * coef;
    const double n_others = n_active - (bit ? 1.0 : 0.0);
    const double sq_others = sq_active - (bit ? sq : 0.0);
    const double df = 2.0 * hyper.a_theta + n_others;
    const double scale = (2.0 * hyper.b_theta + sq_others) / df;
    const double log_odds = prior_logit + logpdf_mvt_iso_sq(sq, 1, df, scale) -
                            logpdf_normal_iso_sq(sq, 1, hyper.psi2_inf);
    RngStream rng(ctx.seed, label);
    const char fresh = static_cast<char>(rng.bernoulli_logit(log_odds));
    n_active += static_cast<double>(fresh - bit);
    sq_active += static_cast<double>(fresh - bit) * sq;
    bit = fresh;
  };
  for (int h = 0; h < K; ++h)
    draw_bit(s.theta(h), s.r[static_cast<std::size_t>(h)], {Rv::ResponseBit, -1, h, ctx.iteration});
  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    for (int h = 0; h < v.K_m(); ++h)
      draw_bit(v.theta_m(h), v.r_m[static_cast<std::size_t>(h)],
               {Rv::ResponseBit, m, h, ctx.iteration});
  }
}

void update_sticks_and_hypervariances(ModelState& s, const HyperParams& hyper,
                                      bool supervised, const SweepContext& ctx) {
  const int M = s.n_views();
  const int K = s.K;

  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    for (int h = 0; h + 1 < K; ++h) {
      int eq = 0, gt = 0;
      for (int l = 0; l < K; ++l) {
        eq += v.zeta[static_cast<std::size_t>(l)] == h + 1 ? 1 : 0;
        gt += v.zeta[static_cast<std::size_t>(l)] > h + 1 ? 1 : 0;
      }
      RngStream rng(ctx.seed, {Rv::Stick, m, h, ctx.iteration});
      v.nu(h) = rng.beta(1.0 + eq, hyper.alpha_shared[static_cast<std::size_t>(m)] + gt);
    }
    v.nu(K - 1) = 1.0;

    const int Km = v.K_m();
    if (Km > 0) {
      for (int h = 0; h + 1 < Km; ++h) {
        int eq = 0, gt = 0;
        for (int l = 0; l < Km; ++l) {
          eq += v.delta[static_cast<std::size_t>(l)] == h + 1 ? 1 : 0;
          gt += v.delta[static_cast<std::size_t>(l)] > h + 1 ? 1 : 0;
        }
        RngStream rng(ctx.seed, {Rv::StickSpecific, m, h, ctx.iteration});
        v.rho(h) = rng.beta(1.0 + eq, hyper.alpha_specific[static_cast<std::size_t>(m)] + gt);
      }
      v.rho(Km - 1) = 1.0;
    }
  }

  int n_active = 0, total = s.total_rank();
  if (supervised) {
    for (int h = 0; h < K; ++h) n_active += s.r[static_cast<std::size_t>(h)] ? 1 : 0;
    for (const auto& v : s.views)
      for (int h = 0; h < v.K_m(); ++h) n_active += v.r_m[static_cast<std::size_t>(h)] ? 1 : 0;
    RngStream rng(ctx.seed, {Rv::Xi, -1, 0, ctx.iteration});
    s.xi = rng.beta(hyper.a_xi + n_active, hyper.b_xi + (total - n_active));
  }

  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const double half_p = 0.5 * static_cast<double>(v.p());
    for (int h = 0; h < K; ++h) {
      if (shared_active(v, h)) {
        RngStream rng(ctx.seed, {Rv::SlabVar, m, h, ctx.iteration});
        v.tau2(h) = rng.inverse_gamma(hyper.a_L + half_p,
                                      hyper.b_L + 0.5 * v.Lambda.col(h).squaredNorm());
      } else {
        v.tau2(h) = hyper.tau2_inf;
      }
    }
    for (int h = 0; h < v.K_m(); ++h) {
      if (specific_active(v, h)) {
        RngStream rng(ctx.seed, {Rv::SlabVarSpecific, m, h, ctx.iteration});
        v.chi2(h) = rng.inverse_gamma(hyper.a_L + half_p,
                                      hyper.b_L + 0.5 * v.Gamma.col(h).squaredNorm());
      } else {
        v.chi2(h) = hyper.tau2_inf;
      }
    }
  }

  if (supervised) {
    double sq_active = 0.0;
    for (int h = 0; h < K; ++h)
      if (s.r[static_cast<std::size_t>(h)]) sq_active += s.theta(h) * s.theta(h);
    for (const auto& v : s.views)
      for (int h = 0; h < v.K_m(); ++h)
        if (v.r_m[static_cast<std::size_t>(h)]) sq_active += v.theta_m(h) * v.theta_m(h);
    RngStream rng(ctx.seed, {Rv::ResponseSlabVar, -1, 0, ctx.iteration});
    s.psi2_o = rng.inverse_gamma(hyper.a_theta + 0.5 * n_active, hyper.b_theta + 0.5 * sq_active);
    for (int h = 0; h < K; ++h)
      s.psi2(h) = s.r[static_cast<std::size_t>(h)] ? s.psi2_o : hyper.psi2_inf;
    for (auto& v : s.views)
      for (int h = 0; h < v.K_m(); ++h)
        v.psi2_m(h) = v.r_m[static_cast<std::size_t>(h)] ? s.psi2_o : hyper.psi2_inf;
  }
}

namespace {

int shared_keep_threshold(PriorVariant variant) {
  return (variant == PriorVariant::DCUSP || variant == PriorVariant::FULLD) ? 2 : 1;
}

// Shrink-or-grow of the shared block following the common adaptation pattern:
// more than one prunable column -> keep the rest plus one spike buffer, else
// grow by one (clamped at the bound).
void adapt_shared_block(ModelState& s, const ModelConfig& cfg, const SweepContext& ctx) {
  const int M = s.n_views();
  const Eigen::Index n = s.n();
  const int K = s.K;
  const int need = shared_keep_threshold(cfg.prior_variant);

  std::vector<int> keep;
  for (int h = 0; h < K; ++h)
    if (shared_activity_count(s, h) >= need) keep.push_back(h);

  const bool shrink = static_cast<int>(keep.size()) < K - 1;
  int K_new;
  if (shrink) {
    K_new = static_cast<int>(keep.size()) + 1;
  } else {
    K_new = std::min(K + 1, cfg.K_max);
    if (K_new == K) return;  // at the ceiling
    keep.resize(static_cast<std::size_t>(K));
    std::iota(keep.begin(), keep.end(), 0);
  }
  const int kept = static_cast<int>(keep.size());

  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    RngStream rng(ctx.seed, {Rv::Adapt, m, 2, ctx.iteration});
    Eigen::MatrixXd Lambda(v.p(), K_new);
    Eigen::VectorXd tau2(K_new), nu(K_new);
    std::vector<int> zeta(static_cast<std::size_t>(K_new));
    for (int t = 0; t < kept; ++t) {
      const int h = keep[static_cast<std::size_t>(t)];
      Lambda.col(t) = v.Lambda.col(h);
      tau2(t) = v.tau2(h);
      nu(t) = v.nu(h);
      zeta[static_cast<std::size_t>(t)] = std::min(v.zeta[static_cast<std::size_t>(h)], K_new);
    }
    if (!shrink) nu(K - 1) = rng.beta(1.0, cfg.hyper.alpha_shared[static_cast<std::size_t>(m)]);
    nu(K_new - 1) = 1.0;
    Lambda.col(K_new - 1) = std::sqrt(cfg.hyper.tau2_inf) * rng.normal_vector(v.p());
    tau2(K_new - 1) = cfg.hyper.tau2_inf;
    zeta[static_cast<std::size_t>(K_new - 1)] = 1 + rng.categorical_log(stick_log_weights(nu));
    v.Lambda = std::move(Lambda);
    v.tau2 = std::move(tau2);
    v.nu = std::move(nu);
    v.zeta = std::move(zeta);
  }

  RngStream rng(ctx.seed, {Rv::Adapt, -1, 1, ctx.iteration});
  Eigen::MatrixXd eta(n, K_new);
  Eigen::VectorXd theta(K_new), psi2(K_new);
  std::vector<char> r(static_cast<std::size_t>(K_new));
  for (int t = 0; t < kept; ++t) {
    const int h = keep[static_cast<std::size_t>(t)];
    eta.col(t) = s.eta.col(h);
    theta(t) = s.theta(h);
    psi2(t) = s.psi2(h);
    r[static_cast<std::size_t>(t)] = s.r[static_cast<std::size_t>(h)];
  }
  eta.col(K_new - 1) = rng.normal_vector(n);
  theta(K_new - 1) = cfg.supervised ? std::sqrt(cfg.hyper.psi2_inf) * rng.normal() : 0.0;
  psi2(K_new - 1) = cfg.hyper.psi2_inf;
  r[static_cast<std::size_t>(K_new - 1)] = 0;
  s.eta = std::move(eta);
  s.theta = std::move(theta);
  s.psi2 = std::move(psi2);
  s.r = std::move(r);
  s.K = K_new;
}

void adapt_specific_block(ModelState& s, int m, const ModelConfig& cfg, const SweepContext& ctx) {
  auto& v = s.views[static_cast<std::size_t>(m)];
  const Eigen::Index n = s.n();
  const int Km = v.K_m();
  const int bound = cfg.K_m_max[static_cast<std::size_t>(m)];

  std::vector<int> keep;
  for (int h = 0; h < Km; ++h)
    if (specific_active(v, h)) keep.push_back(h);

  const bool shrink = static_cast<int>(keep.size()) < Km - 1;
  int K_new;
  if (shrink) {
    K_new = static_cast<int>(keep.size()) + 1;
  } else {
    K_new = std::min(Km + 1, bound);
    if (K_new == Km) return;
    keep.resize(static_cast<std::size_t>(Km));
    std::iota(keep.begin(), keep.end(), 0);
  }
  const int kept = static_cast<int>(keep.size());

  RngStream rng(ctx.seed, {Rv::Adapt, m, 3, ctx.iteration});
  Eigen::MatrixXd Gamma(v.p(), K_new), phi(n, K_new);
  Eigen::VectorXd chi2(K_new), rho(K_new), theta_m(K_new), psi2_m(K_new);
  std::vector<int> delta(static_cast<std::size_t>(K_new));
  std::vector<char> r_m(static_cast<std::size_t>(K_new));
  for (int t = 0; t < kept; ++t) {
    const int h = keep[static_cast<std::size_t>(t)];
    Gamma.col(t) = v.Gamma.col(h);
    phi.col(t) = v.phi.col(h);
    chi2(t) = v.chi2(h);
    rho(t) = v.rho(h);
    theta_m(t) = v.theta_m(h);
    psi2_m(t) = v.psi2_m(h);
    delta[static_cast<std::size_t>(t)] = std::min(v.delta[static_cast<std::size_t>(h)], K_new);
    r_m[static_cast<std::size_t>(t)] = v.r_m[static_cast<std::size_t>(h)];
  }
  if (!shrink) rho(Km - 1) = rng.beta(1.0, cfg.hyper.alpha_specific[static_cast<std::size_t>(m)]);
  rho(K_new - 1) = 1.0;
  Gamma.col(K_new - 1) = std::sqrt(cfg.hyper.tau2_inf) * rng.normal_vector(v.p());
  chi2(K_new - 1) = cfg.hyper.tau2_inf;
  delta[static_cast<std::size_t>(K_new - 1)] = 1 + rng.categorical_log(stick_log_weights(rho));
  phi.col(K_new - 1) = rng.normal_vector(n);
  theta_m(K_new - 1) = cfg.supervised ? std::sqrt(cfg.hyper.psi2_inf) * rng.normal() : 0.0;
  psi2_m(K_new - 1) = cfg.hyper.psi2_inf;
  r_m[static_cast<std::size_t>(K_new - 1)] = 0;

  v.Gamma = std::move(Gamma);
  v.phi = std::move(phi);
  v.chi2 = std::move(chi2);
  v.rho = std::move(rho);
  v.theta_m = std::move(theta_m);
  v.psi2_m = std::move(psi2_m);
  v.delta = std::move(delta);
  v.r_m = std::move(r_m);
}

}  // namespace

void apply_rank_adaptation(ModelState& s, const ModelConfig& cfg, const SweepContext& ctx) {
  adapt_shared_block(s, cfg, ctx);
  if (s.family == Family::JAFAR)
    for (int m = 0; m < s.n_views(); ++m) adapt_specific_block(s, m, cfg, ctx);
}

bool adapt_ranks(ModelState& s, const ModelConfig& cfg, const SweepContext& ctx) {
  RngStream rng(ctx.seed, {Rv::Adapt, -1, 0, ctx.iteration});
  const double u = rng.uniform();
  if (ctx.iteration < cfg.adaptation.t_adapt) return false;
  if (u >= cfg.adaptation.fire_probability(ctx.iteration)) return false;
  apply_rank_adaptation(s, cfg, ctx);
  return true;
}

std::vector<Eigen::MatrixXd> impute_missing(const ModelState& s, const MultiviewDataset& data_z,
                                            const SweepContext& ctx) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(s.n_views()));
  for (int m = 0; m < s.n_views(); ++m) {
    const auto& v = s.views[static_cast<std::size_t>(m)];
    const auto& X = data_z.views[static_cast<std::size_t>(m)];
    const auto& mask = data_z.observed[static_cast<std::size_t>(m)];
    Eigen::MatrixXd filled = X;
    for (Eigen::Index i = 0; i < s.n(); ++i) {
      if (mask.row(i).all()) continue;
      RngStream rng(ctx.seed, {Rv::Impute, m, i, ctx.iteration});
      for (Eigen::Index j = 0; j < v.p(); ++j) {
        if (mask(i, j)) continue;
        double mean = v.mu(j) + v.Lambda.row(j).dot(s.eta.row(i));
        if (v.K_m() > 0) mean += v.Gamma.row(j).dot(v.phi.row(i));
        filled(i, j) = mean + std::sqrt(v.sigma2(j)) * rng.normal();
      }
    }
    out.push_back(std::move(filled));
  }
  return out;
}

void zero_response_block(ModelState& s, const HyperParams& hyper) {
  s.mu_y = 0.0;
  s.theta.setZero();
  std::fill(s.r.begin(), s.r.end(), char{0});
  s.psi2.setConstant(hyper.psi2_inf);
  s.psi2_o = hyper.b_theta / hyper.a_theta;
  s.sigma2_y = 1.0;
  s.xi = hyper.a_xi / (hyper.a_xi + hyper.b_xi);
  for (auto& v : s.views) {
    v.theta_m.setZero();
    std::fill(v.r_m.begin(), v.r_m.end(), char{0});
    v.psi2_m.setConstant(hyper.psi2_inf);
  }
}

ModelState draw_state_from_prior(const ModelConfig& cfg, Eigen::Index n,
                                 const std::vector<Eigen::Index>& p,
                                 std::uint64_t seed, std::int64_t replicate) {
  const int M = static_cast<int>(p.size());
  cfg.validate(M);
  const auto& hy = cfg.hyper;
  const int K = cfg.K_max;

  ModelState s;
  s.family = cfg.family;
  s.K = K;
  s.views.resize(static_cast<std::size_t>(M));

  RngStream g(seed, {Rv::PriorState, -1, 0, replicate});
  s.xi = g.beta(hy.a_xi, hy.b_xi);
  s.psi2_o = g.inverse_gamma(hy.a_theta, hy.b_theta);
  s.r.resize(static_cast<std::size_t>(K));
  s.psi2.resize(K);
  s.theta.resize(K);
  for (int h = 0; h < K; ++h) {
    s.r[static_cast<std::size_t>(h)] = static_cast<char>(g.bernoulli(s.xi));
    s.psi2(h) = s.r[static_cast<std::size_t>(h)] ? s.psi2_o : hy.psi2_inf;
    s.theta(h) = std::sqrt(s.psi2(h)) * g.normal();
  }
  s.mu_y = std::sqrt(hy.upsilon2_y) * g.normal();
  s.sigma2_y = g.inverse_gamma(hy.a_sigma, hy.b_sigma);
  s.eta.resize(n, K);
  for (Eigen::Index i = 0; i < n; ++i) s.eta.row(i) = g.normal_vector(K);

  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const Eigen::Index pm = p[static_cast<std::size_t>(m)];
    RngStream r(seed, {Rv::PriorState, m, 0, replicate});

    v.nu.resize(K);
    for (int h = 0; h + 1 < K; ++h)
      v.nu(h) = r.beta(1.0, hy.alpha_shared[static_cast<std::size_t>(m)]);
    v.nu(K - 1) = 1.0;
    const Eigen::VectorXd logw = stick_log_weights(v.nu);
    v.zeta.resize(static_cast<std::size_t>(K));
    for (int h = 0; h < K; ++h) v.zeta[static_cast<std::size_t>(h)] = 1 + r.categorical_log(logw);
    v.tau2.resize(K);
    v.Lambda.resize(pm, K);
    for (int h = 0; h < K; ++h) {
      v.tau2(h) = shared_active(v, h) ? r.inverse_gamma(hy.a_L, hy.b_L) : hy.tau2_inf;
      v.Lambda.col(h) = std::sqrt(v.tau2(h)) * r.normal_vector(pm);
    }
    v.mu = std::sqrt(hy.upsilon2) * r.normal_vector(pm);
    v.sigma2.resize(pm);
    for (Eigen::Index j = 0; j < pm; ++j) v.sigma2(j) = r.inverse_gamma(hy.a_sigma, hy.b_sigma);

    const int Km = cfg.family == Family::JAFAR ? cfg.K_m_max[static_cast<std::size_t>(m)] : 0;
    v.Gamma.resize(Km > 0 ? pm : 0, Km);
    v.chi2.resize(Km);
    v.rho.resize(Km);
    v.delta.resize(static_cast<std::size_t>(Km));
    v.phi.resize(n, Km);
    v.theta_m.resize(Km);
    v.r_m.resize(static_cast<std::size_t>(Km));
    v.psi2_m.resize(Km);
    if (Km > 0) {
      for (int h = 0; h + 1 < Km; ++h)
        v.rho(h) = r.beta(1.0, hy.alpha_specific[static_cast<std::size_t>(m)]);
      v.rho(Km - 1) = 1.0;
      const Eigen::VectorXd logw_s = stick_log_weights(v.rho);
      for (int h = 0; h < Km; ++h)
        v.delta[static_cast<std::size_t>(h)] = 1 + r.categorical_log(logw_s);
      for (int h = 0; h < Km; ++h) {
        v.chi2(h) = specific_active(v, h) ? r.inverse_gamma(hy.a_L, hy.b_L) : hy.tau2_inf;
        v.Gamma.col(h) = std::sqrt(v.chi2(h)) * r.normal_vector(pm);
      }
      for (Eigen::Index i = 0; i < n; ++i) v.phi.row(i) = r.normal_vector(Km);
      for (int h = 0; h < Km; ++h) {
        v.r_m[static_cast<std::size_t>(h)] = static_cast<char>(r.bernoulli(s.xi));
        v.psi2_m(h) = v.r_m[static_cast<std::size_t>(h)] ? s.psi2_o : hy.psi2_inf;
        v.theta_m(h) = std::sqrt(v.psi2_m(h)) * r.normal();
      }
    }
  }

  if (!cfg.supervised) zero_response_block(s, hy);
  s.validate(hy, &cfg);
  return s;
}

MultiviewDataset draw_data_given_state(const ModelState& s, bool with_response,
                                       std::uint64_t seed, std::int64_t replicate) {
  const Eigen::Index n = s.n();
  MultiviewDataset d;
  d.views.reserve(static_cast<std::size_t>(s.n_views()));
  d.observed.reserve(static_cast<std::size_t>(s.n_views()));
  for (int m = 0; m < s.n_views(); ++m) {
    const auto& v = s.views[static_cast<std::size_t>(m)];
    RngStream rng(seed, {Rv::PriorData, m, 0, replicate});
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1) * v.mu.transpose();
    X.noalias() += s.eta * v.Lambda.transpose();
    if (v.K_m() > 0) X.noalias() += v.phi * v.Gamma.transpose();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < v.p(); ++j) X(i, j) += std::sqrt(v.sigma2(j)) * rng.normal();
    d.views.push_back(std::move(X));
    d.observed.push_back(BoolMatrix::Constant(n, v.p(), true));
    d.feature_names.emplace_back();
    for (Eigen::Index j = 0; j < v.p(); ++j)
      d.feature_names.back().push_back("v" + std::to_string(m + 1) + "_x" + std::to_string(j + 1));
  }
  for (Eigen::Index i = 0; i < n; ++i) d.subject_ids.push_back(std::to_string(i + 1));
  if (with_response) {
    RngStream rng(seed, {Rv::PriorData, -1, 0, replicate});
    d.response = stacked_factors(s) * stacked_response_coefs(s);
    d.response.array() += s.mu_y;
    for (Eigen::Index i = 0; i < n; ++i) d.response(i) += std::sqrt(s.sigma2_y) * rng.normal();
    d.response_observed.assign(static_cast<std::size_t>(n), char{1});
  }
  d.validate(with_response);
  return d;
}

ChainArchive run_chain(const ModelConfig& cfg, const MultiviewDataset& data_z,
                       const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate(data_z.n_views());
  data_z.validate(cfg.supervised);

  ModelState s = init_state(cfg, data_z, cfg.mcmc.seed);
  if (!cfg.supervised) zero_response_block(s, cfg.hyper);

  ArchiveWriter writer(opts.out_dir);
  writer.put_config(model_config_to_tree(cfg));
  if (opts.standardization) writer.put_standardization(*opts.standardization);

  RankTrajectory ranks;
  const std::int64_t T = cfg.mcmc.iterations;
  const char* step_name = "init";
  try {
    for (std::int64_t t = 1; t <= T; ++t) {
      const SweepContext ctx{cfg.mcmc.seed, t};
      step_name = "loadings rows";
      update_loadings_rows(s, data_z, cfg.hyper, ctx);
      if (cfg.supervised) {
        step_name = "response coefficients";
        update_response_coefs(s, data_z, cfg.hyper, ctx);
      }
      step_name = "idiosyncratic variances";
      update_variances(s, data_z, cfg.hyper, cfg.supervised, ctx);
      step_name = "latent factors";
      if (cfg.supervised)
        update_factors_supervised(s, data_z, ctx);
      else
        update_factors_collapsed(s, data_z, ctx);
      step_name = "memberships";
      update_memberships(s, data_z, cfg.hyper, cfg.prior_variant, cfg.tempering, cfg.supervised,
                         ctx);
      step_name = "sticks and hypervariances";
      update_sticks_and_hypervariances(s, cfg.hyper, cfg.supervised, ctx);
      if (cfg.adaptation.enabled) {
        step_name = "rank adaptation";
        adapt_ranks(s, cfg, ctx);
      }

      ranks.iteration.push_back(t);
      ranks.K.push_back(s.K);
      if (cfg.family == Family::JAFAR) {
        std::vector<int> km;
        km.reserve(s.views.size());
        for (const auto& v : s.views) km.push_back(v.K_m());
        ranks.K_m.push_back(std::move(km));
      }

      if (t > cfg.mcmc.burnin && (t - cfg.mcmc.burnin) % cfg.mcmc.thin == 0) {
        step_name = "archive write";
        writer.put_state(s, t, cfg.slim_archive);
      }

      if (opts.progress) {
        opts.progress(t, s);
      } else if (!opts.quiet && cfg.mcmc.log_every > 0 &&
                 (t % cfg.mcmc.log_every == 0 || t == T)) {
        std::cerr << "[mvfr] sweep " << t << "/" << T << "  shared rank " << s.K;
        if (cfg.family == Family::JAFAR) {
          std::cerr << "  specific ranks";
          for (const auto& v : s.views) std::cerr << ' ' << v.K_m();
        }
        std::cerr << '\n';
      }
    }
  } catch (const NumericalError& e) {
    throw NumericalError("chain aborted at iteration " +
                         std::to_string(ranks.iteration.size() + 1) + ", step '" + step_name +
                         "': " + e.what());
  }

  writer.put_ranks(ranks);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  writer.put_scalar("runtime_seconds", -1, seconds);
  writer.finish();
  return ChainArchive::open(opts.out_dir);
}

}  // namespace mvfr
