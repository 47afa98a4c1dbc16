#include "mvfr/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mvfr/errors.hpp"

namespace mvfr {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be > 0");
}

// reject typos: every key under `section.` must be in `allowed`
void check_known_keys(const ConfigTree& tree, const std::string& section,
                      const std::set<std::string>& allowed) {
  for (const auto& key : tree.keys_with_prefix(section + ".")) {
    const std::string name = key.substr(section.size() + 1);
    if (!allowed.count(name))
      throw ConfigError("unknown config key '" + key + "'");
  }
}

std::vector<double> per_view(const ConfigTree& tree, const std::string& key, int n_views) {
  auto vals = tree.get_double_array(key);
  if (vals.size() == 1) vals.assign(static_cast<std::size_t>(n_views), vals[0]);
  if (vals.size() != static_cast<std::size_t>(n_views))
    throw ConfigError("'" + key + "' needs 1 or " + std::to_string(n_views) + " entries");
  return vals;
}

}  // namespace

std::string to_string(Family f) { return f == Family::JFR ? "jfr" : "jafar"; }

std::string to_string(PriorVariant v) {
  switch (v) {
    case PriorVariant::ICUSP: return "icusp";
    case PriorVariant::DCUSP: return "dcusp";
    case PriorVariant::NAIVE: return "naive";
    case PriorVariant::FULLD: return "fulld";
  }
  return "?";
}

Family family_from_string(const std::string& s) {
  const std::string l = lower(s);
  if (l == "jfr") return Family::JFR;
  if (l == "jafar") return Family::JAFAR;
  throw ConfigError("unknown model family '" + s + "' (expected jfr or jafar)");
}

PriorVariant variant_from_string(const std::string& s) {
  const std::string l = lower(s);
  if (l == "icusp") return PriorVariant::ICUSP;
  if (l == "dcusp") return PriorVariant::DCUSP;
  if (l == "naive") return PriorVariant::NAIVE;
  if (l == "fulld") return PriorVariant::FULLD;
  throw ConfigError("unknown prior variant '" + s + "' (expected icusp, dcusp, naive or fulld)");
}

void HyperParams::validate(int n_views, Family family) const {
  require_positive(a_sigma, "a_sigma");
  require_positive(b_sigma, "b_sigma");
  require_positive(upsilon2, "upsilon2");
  require_positive(upsilon2_y, "upsilon2_y");
  require_positive(a_L, "a_L");
  require_positive(b_L, "b_L");
  require_positive(tau2_inf, "tau2_inf");
  require_positive(a_theta, "a_theta");
  require_positive(b_theta, "b_theta");
  require_positive(psi2_inf, "psi2_inf");
  require_positive(a_xi, "a_xi");
  require_positive(b_xi, "b_xi");
  // increasing-shrinkage condition: the slab prior mean must dominate the spike
  if (!(b_L / a_L > tau2_inf))
    throw ConfigError("slab mean b_L/a_L must exceed the spike variance tau2_inf");
  if (alpha_shared.size() != static_cast<std::size_t>(n_views))
    throw ConfigError("alpha (shared) needs one entry per view");
  for (double a : alpha_shared) require_positive(a, "alpha (shared)");
  if (family == Family::JAFAR) {
    if (alpha_specific.size() != static_cast<std::size_t>(n_views))
      throw ConfigError("alpha_specific needs one entry per view");
    for (double a : alpha_specific) require_positive(a, "alpha_specific");
  } else if (!alpha_specific.empty()) {
    throw ConfigError("alpha_specific is meaningless for the jfr family");
  }
}

void AdaptationSettings::validate() const {
  if (t_adapt < 1) throw ConfigError("adaptation t_adapt must be >= 1");
  if (d1 > 0.0) throw ConfigError("adaptation d1 must be <= 0 (diminishing adaptation)");
}

double AdaptationSettings::fire_probability(std::int64_t t) const {
  return std::min(1.0, std::exp(d0 + d1 * static_cast<double>(t)));
}

void ModelConfig::validate(int n_views) const {
  if (n_views < 1) throw ConfigError("need at least one view");
  hyper.validate(n_views, family);
  adaptation.validate();
  if (K_max < 1) throw ConfigError("K_max must be >= 1");
  if (family == Family::JFR) {
    if (!K_m_max.empty())
      throw ConfigError("jfr has a single factor block; per-view rank bounds are not allowed");
    if (prior_variant != PriorVariant::ICUSP)
      throw ConfigError("family jfr requires the icusp prior variant");
  } else {
    if (prior_variant == PriorVariant::ICUSP)
      throw ConfigError("the icusp prior variant requires family jfr");
    if (K_m_max.size() != static_cast<std::size_t>(n_views))
      throw ConfigError("jafar needs one specific-rank bound per view");
    for (int k : K_m_max)
      if (k < 1) throw ConfigError("per-view rank bounds must be >= 1");
  }
  if (mcmc.iterations < 1) throw ConfigError("mcmc iterations must be >= 1");
  if (mcmc.burnin < 0 || mcmc.burnin >= mcmc.iterations)
    throw ConfigError("mcmc burnin must satisfy 0 <= burnin < iterations");
  if (mcmc.thin < 1) throw ConfigError("mcmc thin must be >= 1");
}

double expected_shared_rank(double alpha, int n_views) {
  require_positive(alpha, "alpha");
  if (n_views < 2) throw ConfigError("expected shared rank needs at least two views");
  const double q = alpha / (1.0 + alpha);
  const double m = static_cast<double>(n_views);
  double total = 0.0;
  for (int h = 1; h <= 10000; ++h) {
    const double qh = std::pow(q, h);
    const double none = std::pow(1.0 - qh, m);
    const double exactly_one = m * qh * std::pow(1.0 - qh, m - 1.0);
    const double term = 1.0 - none - exactly_one;
    total += term;
    if (term < 1e-14 && h > 64) break;
  }
  return total;
}

double alpha_for_expected_rank(double expected, int n_views) {
  if (!(expected > 0.0)) throw ConfigError("expected factor count must be > 0");
  double lo = 1e-8, hi = 1e4;
  if (expected >= expected_shared_rank(hi, n_views))
    throw ConfigError("expected factor count too large to invert");
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (expected_shared_rank(mid, n_views) < expected)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

ModelConfig parse_model_config(const ConfigTree& tree, int n_views) {
  check_known_keys(tree, "model", {"family", "prior", "supervised", "tempering", "slim_archive"});
  check_known_keys(tree, "ranks", {"K_max", "K_m_max"});
  check_known_keys(tree, "mcmc", {"iterations", "burnin", "thin", "seed", "log_every"});
  check_known_keys(tree, "hyper",
                   {"a_sigma", "b_sigma", "upsilon2", "upsilon2_y", "a_L", "b_L", "tau2_inf",
                    "a_theta", "b_theta", "psi2_inf", "a_xi", "b_xi", "alpha", "alpha_specific",
                    "expected_factors"});
  check_known_keys(tree, "adaptation", {"enabled", "t_adapt", "d0", "d1"});

  ModelConfig cfg;
  cfg.family = family_from_string(tree.get_string_or("model.family", "jafar"));
  cfg.prior_variant = variant_from_string(tree.get_string_or(
      "model.prior", cfg.family == Family::JFR ? "icusp" : "dcusp"));
  cfg.supervised = tree.get_bool_or("model.supervised", true);
  cfg.tempering = tree.get_bool_or("model.tempering", false);
  cfg.slim_archive = tree.get_bool_or("model.slim_archive", false);

  cfg.K_max = static_cast<int>(tree.get_int("ranks.K_max"));
  if (cfg.family == Family::JAFAR) {
    auto bounds = tree.get_int_array("ranks.K_m_max");
    if (bounds.size() == 1) bounds.assign(static_cast<std::size_t>(n_views), bounds[0]);
    cfg.K_m_max.assign(bounds.begin(), bounds.end());
  } else if (tree.has("ranks.K_m_max")) {
    throw ConfigError("ranks.K_m_max is not allowed for family jfr");
  }

  cfg.mcmc.iterations = tree.get_int("mcmc.iterations");
  cfg.mcmc.burnin = tree.get_int_or("mcmc.burnin", cfg.mcmc.iterations / 2);
  cfg.mcmc.thin = tree.get_int_or("mcmc.thin", 1);
  cfg.mcmc.seed = static_cast<std::uint64_t>(tree.get_int_or("mcmc.seed", 1));
  cfg.mcmc.log_every = tree.get_int_or("mcmc.log_every", 500);

  HyperParams& h = cfg.hyper;
  h.a_sigma = tree.get_double_or("hyper.a_sigma", h.a_sigma);
  h.b_sigma = tree.get_double_or("hyper.b_sigma", h.b_sigma);
  h.upsilon2 = tree.get_double_or("hyper.upsilon2", h.upsilon2);
  h.upsilon2_y = tree.get_double_or("hyper.upsilon2_y", h.upsilon2_y);
  h.a_L = tree.get_double_or("hyper.a_L", h.a_L);
  h.b_L = tree.get_double_or("hyper.b_L", h.b_L);
  h.tau2_inf = tree.get_double_or("hyper.tau2_inf", h.tau2_inf);
  h.a_theta = tree.get_double_or("hyper.a_theta", h.a_theta);
  h.b_theta = tree.get_double_or("hyper.b_theta", h.b_theta);
  h.psi2_inf = tree.get_double_or("hyper.psi2_inf", h.psi2_inf);
  h.a_xi = tree.get_double_or("hyper.a_xi", h.a_xi);
  h.b_xi = tree.get_double_or("hyper.b_xi", h.b_xi);

  if (tree.has("hyper.alpha") && tree.has("hyper.expected_factors"))
    throw ConfigError("give either hyper.alpha or hyper.expected_factors, not both");
  if (tree.has("hyper.alpha")) {
    h.alpha_shared = per_view(tree, "hyper.alpha", n_views);
  } else if (tree.has("hyper.expected_factors")) {
    const double alpha =
        alpha_for_expected_rank(tree.get_double("hyper.expected_factors"), n_views);
    h.alpha_shared.assign(static_cast<std::size_t>(n_views), alpha);
  } else {
    throw ConfigError("missing hyper.alpha (or hyper.expected_factors)");
  }
  if (cfg.family == Family::JAFAR) {
    h.alpha_specific = tree.has("hyper.alpha_specific")
                           ? per_view(tree, "hyper.alpha_specific", n_views)
                           : h.alpha_shared;
  }

  AdaptationSettings& ad = cfg.adaptation;
  ad.enabled = tree.get_bool_or("adaptation.enabled", true);
  ad.t_adapt = tree.get_int_or("adaptation.t_adapt", 200);
  ad.d0 = tree.get_double_or("adaptation.d0", -0.5);
  ad.d1 = tree.get_double_or("adaptation.d1", -5e-4);

  cfg.validate(n_views);
  return cfg;
}

ConfigTree model_config_to_tree(const ModelConfig& cfg) {
  ConfigTree t;
  t.set("model.family", to_string(cfg.family));
  t.set("model.prior", to_string(cfg.prior_variant));
  t.set("model.supervised", cfg.supervised);
  t.set("model.tempering", cfg.tempering);
  t.set("model.slim_archive", cfg.slim_archive);
  t.set("ranks.K_max", static_cast<std::int64_t>(cfg.K_max));
  if (!cfg.K_m_max.empty()) {
    std::vector<std::int64_t> bounds(cfg.K_m_max.begin(), cfg.K_m_max.end());
    t.set("ranks.K_m_max", bounds);
  }
  t.set("mcmc.iterations", cfg.mcmc.iterations);
  t.set("mcmc.burnin", cfg.mcmc.burnin);
  t.set("mcmc.thin", cfg.mcmc.thin);
  t.set("mcmc.seed", static_cast<std::int64_t>(cfg.mcmc.seed));
  t.set("mcmc.log_every", cfg.mcmc.log_every);
  const HyperParams& h = cfg.hyper;
  t.set("hyper.a_sigma", h.a_sigma);
  t.set("hyper.b_sigma", h.b_sigma);
  t.set("hyper.upsilon2", h.upsilon2);
  t.set("hyper.upsilon2_y", h.upsilon2_y);
  t.set("hyper.a_L", h.a_L);
  t.set("hyper.b_L", h.b_L);
  t.set("hyper.tau2_inf", h.tau2_inf);
  t.set("hyper.a_theta", h.a_theta);
  t.set("hyper.b_theta", h.b_theta);
  t.set("hyper.psi2_inf", h.psi2_inf);
  t.set("hyper.a_xi", h.a_xi);
  t.set("hyper.b_xi", h.b_xi);
  t.set("hyper.alpha", h.alpha_shared);
  if (!h.alpha_specific.empty()) t.set("hyper.alpha_specific", h.alpha_specific);
  t.set("adaptation.enabled", cfg.adaptation.enabled);
  t.set("adaptation.t_adapt", cfg.adaptation.t_adapt);
  t.set("adaptation.d0", cfg.adaptation.d0);
  t.set("adaptation.d1", cfg.adaptation.d1);
  return t;
}

void SimConfig::validate() const {
  if (n_views < 1) throw ConfigError("sim: need at least one view");
  if (n < 1) throw ConfigError("sim: n must be >= 1");
  if (n_test < 0) throw ConfigError("sim: n_test must be >= 0");
  if (p.size() != static_cast<std::size_t>(n_views))
    throw ConfigError("sim: p needs one entry per view");
  for (auto pm : p)
    if (pm < 1) throw ConfigError("sim: every view needs p >= 1");
  if (K_true < 0) throw ConfigError("sim: K must be >= 0");
  if (K_m_true.size() != static_cast<std::size_t>(n_views))
    throw ConfigError("sim: K_m needs one entry per view");
  int total = K_true;
  for (int k : K_m_true) {
    if (k < 0) throw ConfigError("sim: K_m entries must be >= 0");
    total += k;
  }
  if (response_active < 0 || response_active > total)
    throw ConfigError("sim: response_active must be between 0 and the total factor count");
  if (groups < 1) throw ConfigError("sim: groups must be >= 1");
  if (group_weights.size() != static_cast<std::size_t>(groups))
    throw ConfigError("sim: group_weights needs one entry per group");
  double wsum = 0.0;
  for (double w : group_weights) {
    if (w < 0.0) throw ConfigError("sim: group weights must be >= 0");
    wsum += w;
  }
  if (!(std::abs(wsum - 1.0) < 1e-8)) throw ConfigError("sim: group weights must sum to 1");
  for (double prob : {pi_group, pi_sign, pi_entry})
    if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("sim: probabilities must be in [0,1]");
  require_positive(v_o2, "sim v_o2");
  if (r_damp < 0.0) throw ConfigError("sim: r_damp must be >= 0");
  require_positive(loading_mean_a, "sim loading_mean_a");
  require_positive(loading_mean_b, "sim loading_mean_b");
  require_positive(snr_shape, "sim snr_shape");
  require_positive(snr_rate, "sim snr_rate");
  require_positive(theta_a, "sim theta_a");
  require_positive(theta_b, "sim theta_b");
}

SimConfig parse_sim_config(const ConfigTree& tree) {
  check_known_keys(tree, "sim",
                   {"views", "n", "n_test", "p", "K", "K_m", "response_active", "groups",
                    "group_weights", "pi_group", "pi_sign", "pi_entry", "v_o2", "r_damp",
                    "loading_mean", "snr", "theta", "partial_sharing", "warp", "seed"});
  SimConfig cfg;
  const auto p = tree.get_int_array("sim.p");
  cfg.p.assign(p.begin(), p.end());
  cfg.n_views = static_cast<int>(tree.get_int_or("sim.views", static_cast<std::int64_t>(cfg.p.size())));
  cfg.n = tree.get_int("sim.n");
  cfg.n_test = tree.get_int_or("sim.n_test", 0);
  cfg.K_true = static_cast<int>(tree.get_int("sim.K"));
  auto km = tree.get_int_array("sim.K_m");
  if (km.size() == 1) km.assign(static_cast<std::size_t>(cfg.n_views), km[0]);
  cfg.K_m_true.assign(km.begin(), km.end());
  cfg.response_active = static_cast<int>(tree.get_int_or("sim.response_active", 0));
  cfg.groups = static_cast<int>(tree.get_int_or("sim.groups", 10));
  if (tree.has("sim.group_weights")) {
    cfg.group_weights = tree.get_double_array("sim.group_weights");
  } else {
    cfg.group_weights.assign(static_cast<std::size_t>(cfg.groups), 1.0 / cfg.groups);
  }
  cfg.pi_group = tree.get_double_or("sim.pi_group", cfg.pi_group);
  cfg.pi_sign = tree.get_double_or("sim.pi_sign", cfg.pi_sign);
  cfg.pi_entry = tree.get_double_or("sim.pi_entry", cfg.pi_entry);
  cfg.v_o2 = tree.get_double_or("sim.v_o2", cfg.v_o2);
  cfg.r_damp = tree.get_double_or("sim.r_damp", cfg.r_damp);
  if (tree.has("sim.loading_mean")) {
    const auto ab = tree.get_double_array("sim.loading_mean");
    if (ab.size() != 2) throw ConfigError("sim.loading_mean needs [a, b]");
    cfg.loading_mean_a = ab[0];
    cfg.loading_mean_b = ab[1];
  }
  if (tree.has("sim.snr")) {
    const auto sr = tree.get_double_array("sim.snr");
    if (sr.size() != 2) throw ConfigError("sim.snr needs [shape, rate]");
    cfg.snr_shape = sr[0];
    cfg.snr_rate = sr[1];
  }
  if (tree.has("sim.theta")) {
    const auto ab = tree.get_double_array("sim.theta");
    if (ab.size() != 2) throw ConfigError("sim.theta needs [a, b]");
    cfg.theta_a = ab[0];
    cfg.theta_b = ab[1];
  }
  cfg.partial_sharing = tree.get_bool_or("sim.partial_sharing", false);
  cfg.warp_margins = tree.get_bool_or("sim.warp", false);
  cfg.seed = static_cast<std::uint64_t>(tree.get_int_or("sim.seed", 1));
  cfg.validate();
  return cfg;
}

ConfigTree sim_config_to_tree(const SimConfig& cfg) {
  ConfigTree t;
  t.set("sim.views", static_cast<std::int64_t>(cfg.n_views));
  t.set("sim.n", cfg.n);
  t.set("sim.n_test", cfg.n_test);
  t.set("sim.p", cfg.p);
  t.set("sim.K", static_cast<std::int64_t>(cfg.K_true));
  std::vector<std::int64_t> km(cfg.K_m_true.begin(), cfg.K_m_true.end());
  t.set("sim.K_m", km);
  t.set("sim.response_active", static_cast<std::int64_t>(cfg.response_active));
  t.set("sim.groups", static_cast<std::int64_t>(cfg.groups));
  t.set("sim.group_weights", cfg.group_weights);
  t.set("sim.pi_group", cfg.pi_group);
  t.set("sim.pi_sign", cfg.pi_sign);
  t.set("sim.pi_entry", cfg.pi_entry);
  t.set("sim.v_o2", cfg.v_o2);
  t.set("sim.r_damp", cfg.r_damp);
  t.set("sim.loading_mean", std::vector<double>{cfg.loading_mean_a, cfg.loading_mean_b});
  t.set("sim.snr", std::vector<double>{cfg.snr_shape, cfg.snr_rate});
  t.set("sim.theta", std::vector<double>{cfg.theta_a, cfg.theta_b});
  t.set("sim.partial_sharing", cfg.partial_sharing);
  t.set("sim.warp", cfg.warp_margins);
  t.set("sim.seed", static_cast<std::int64_t>(cfg.seed));
  return t;
}

}  // namespace mvfr
