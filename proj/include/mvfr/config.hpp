#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mvfr/configfile.hpp"

namespace mvfr {

// JFR: one stacked set of factors loads on every view.
// JAFAR: shared factors plus one additional specific-factor block per view.
enum class Family { JFR, JAFAR };

// Column-shrinkage prior flavor. ICUSP pairs with JFR; the other three with JAFAR.
// NAIVE drops the >=2-view constraint in adaptation; FULLD couples the per-view
// membership priors across views.
enum class PriorVariant { ICUSP, DCUSP, NAIVE, FULLD };

std::string to_string(Family f);
std::string to_string(PriorVariant v);
Family family_from_string(const std::string& s);
PriorVariant variant_from_string(const std::string& s);

struct HyperParams {
  // idiosyncratic variances (features and response share the InvGa prior)
  double a_sigma = 3.0, b_sigma = 1.0;
  // intercept prior variances
  double upsilon2 = 0.25, upsilon2_y = 0.25;
  // loadings slab InvGa and spike variance
  double a_L = 0.5, b_L = 0.1, tau2_inf = 0.005;
  // response-coefficient slab InvGa, spike variance, and activation-weight Beta
  double a_theta = 0.5, b_theta = 0.1, psi2_inf = 0.005;
  double a_xi = 3.0, b_xi = 2.0;
  // stick-breaking concentrations, one per view (shared-loadings block; and the
  // specific block for JAFAR)
  std::vector<double> alpha_shared;
  std::vector<double> alpha_specific;

  void validate(int n_views, Family family) const;
};

struct AdaptationSettings {
  bool enabled = true;
  std::int64_t t_adapt = 200;
  double d0 = -0.5;
  double d1 = -5e-4;

  void validate() const;
  // activation probability at iteration t (1-based); monotone nonincreasing
  double fire_probability(std::int64_t t) const;
};

struct McmcSettings {
  std::int64_t iterations = 10000;
  std::int64_t burnin = 5000;
  std::int64_t thin = 10;
  std::uint64_t seed = 1;
  std::int64_t log_every = 500;
};

struct ModelConfig {
  Family family = Family::JAFAR;
  bool supervised = true;
  PriorVariant prior_variant = PriorVariant::DCUSP;
  HyperParams hyper;
  int K_max = 0;
  std::vector<int> K_m_max;  // must stay empty for JFR
  bool tempering = false;
  McmcSettings mcmc;
  AdaptationSettings adaptation;
  bool slim_archive = false;  // archive loadings/coefficients only, skip factor scores

  void validate(int n_views) const;
};

// Prior mean of the number of columns active in at least two views when every
// view uses concentration alpha (series truncated at 10^4 terms), and its inverse.
double expected_shared_rank(double alpha, int n_views);
double alpha_for_expected_rank(double expected, int n_views);

// Reads [model]/[ranks]/[mcmc]/[hyper]/[adaptation] keys; n_views fixes the
// per-view defaults. Accepts hyper.expected_factors as an alternative to
// hyper.alpha. Unknown keys under those sections are rejected.
ModelConfig parse_model_config(const ConfigTree& tree, int n_views);
// Serializes every effective setting (defaults included) for the run snapshot.
ConfigTree model_config_to_tree(const ModelConfig& cfg);

struct SimConfig {
  int n_views = 3;
  std::int64_t n = 50;
  std::int64_t n_test = 0;
  std::vector<std::int64_t> p;       // features per view
  int K_true = 4;                    // shared columns
  std::vector<int> K_m_true;         // specific columns per view
  int response_active = 0;           // 0 = unsupervised dataset
  int groups = 10;                   // feature blocks per loading matrix
  std::vector<double> group_weights; // defaults to uniform
  double pi_group = 0.5;             // per-(group,column) activation gate
  double pi_sign = 0.5;              // per-(group,column) sign flip
  double pi_entry = 0.9;             // per-entry retention gate
  double v_o2 = 0.1;
  double r_damp = 1e-2;
  double loading_mean_a = 5.0, loading_mean_b = 3.0;  // Beta law of block means
  double snr_shape = 10.0, snr_rate = 30.0;           // InvGa law of per-feature SNR
  double theta_a = 5.0, theta_b = 3.0;                // Beta law of |theta|
  bool partial_sharing = false;  // Bernoulli(1/2) view activity per shared column, >=2 views
  bool warp_margins = false;     // monotone-deform views to stress the copula layer
  std::uint64_t seed = 1;

  void validate() const;
};

SimConfig parse_sim_config(const ConfigTree& tree);
ConfigTree sim_config_to_tree(const SimConfig& cfg);

}  // namespace mvfr
