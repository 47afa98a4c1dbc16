#pragma once
#include <Eigen/Dense>
#include <vector>

#include "mvfr/config.hpp"
#include "mvfr/dataset.hpp"
#include "mvfr/rng.hpp"

namespace mvfr {

// Per-view parameter block. Shared-factor columns live in Lambda/tau2/zeta/nu;
// the specific block (Gamma, chi2, delta, rho, phi, theta_m, r_m, psi2_m) has
// zero width for the JFR family. Membership indicators are 1-based as in the
// stick-breaking construction: column h (0-based) is in the slab group iff
// zeta[h] > h+1.
struct ViewState {
  Eigen::VectorXd mu;       // p_m intercepts
  Eigen::MatrixXd Lambda;   // p_m x K shared loadings
  Eigen::VectorXd sigma2;   // p_m idiosyncratic variances
  Eigen::VectorXd tau2;     // K shared-column variances (spike value or slab draw)
  std::vector<int> zeta;    // K shared membership indicators, values in 1..K
  Eigen::VectorXd nu;       // K stick fractions, nu[K-1] pinned to 1

  Eigen::MatrixXd Gamma;    // p_m x K_m specific loadings
  Eigen::VectorXd chi2;     // K_m specific-column variances
  std::vector<int> delta;   // K_m specific membership indicators, values in 1..K_m
  Eigen::VectorXd rho;      // K_m stick fractions, rho[K_m-1] pinned to 1
  Eigen::MatrixXd phi;      // n x K_m specific factors
  Eigen::VectorXd theta_m;  // K_m response coefficients on specific factors
  std::vector<char> r_m;    // K_m response activation bits
  Eigen::VectorXd psi2_m;   // K_m response-coefficient variances

  Eigen::Index p() const { return mu.size(); }
  int K_m() const { return static_cast<int>(Gamma.cols()); }
};

struct ModelState {
  Family family = Family::JAFAR;
  int K = 0;                      // current shared rank
  std::vector<ViewState> views;
  Eigen::MatrixXd eta;            // n x K shared factors

  double mu_y = 0.0;
  Eigen::VectorXd theta;          // K response coefficients on shared factors
  std::vector<char> r;            // K response activation bits
  Eigen::VectorXd psi2;           // K response-coefficient variances
  double psi2_o = 0.0;            // current slab value behind the active psi2 entries
  double sigma2_y = 1.0;
  double xi = 0.5;                // probability that a coefficient is in the slab

  int n_views() const { return static_cast<int>(views.size()); }
  Eigen::Index n() const { return eta.rows(); }
  int total_rank() const;         // K + sum of K_m

  // structural shape checks plus the indicator/hypervariance consistency
  // invariant; bounds against cfg when given
  void validate(const HyperParams& hyper, const ModelConfig* cfg = nullptr) const;
};

// slab-group tests (h is a 0-based column index)
inline bool shared_active(const ViewState& v, int h) { return v.zeta[static_cast<std::size_t>(h)] > h + 1; }
inline bool specific_active(const ViewState& v, int h) { return v.delta[static_cast<std::size_t>(h)] > h + 1; }
// number of views whose shared column h sits in the slab group
int shared_activity_count(const ModelState& s, int h);

// stick-breaking log weights: log w_h = log nu_h + sum_{l<h} log(1 - nu_l)
Eigen::VectorXd stick_log_weights(const Eigen::VectorXd& nu);

// The stacked representation that reduces JAFAR to a single-factor-block model:
// Lambda~_m = [Lambda_m, 0, ..., Gamma_m, ..., 0] of width total_rank(), factors
// eta~ = [eta, phi_1, ..., phi_M], coefficients theta~ = [theta, theta_1, ...].
Eigen::MatrixXd stacked_loadings(const ModelState& s, int m);
Eigen::MatrixXd stacked_factors(const ModelState& s);
Eigen::VectorXd stacked_response_coefs(const ModelState& s);

// Ranks start at their bounds, loadings/factors/coefficients from N(0, 0.01),
// variances at prior means (slab columns at the b/a prior scale), indicators
// and sticks from their priors, intercepts at observed column means.
ModelState init_state(const ModelConfig& cfg, const MultiviewDataset& data_z, std::uint64_t seed);

}  // namespace mvfr
