#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvfr/archive.hpp"
#include "mvfr/config.hpp"
#include "mvfr/dataset.hpp"
#include "mvfr/state.hpp"

namespace mvfr {

// Stamp for every RNG stream opened inside one sweep. A draw depends only on
// (seed, iteration, site label), so the data-parallel loops are reproducible
// under any schedule, and a single update can be replayed in isolation by
// varying `iteration` as a replicate index.
struct SweepContext {
  std::uint64_t seed = 1;
  std::int64_t iteration = 0;
};

// Joint per-feature row draw [intercept, shared row, specific row] from its
// Gaussian full conditional. Rows are conditionally independent given the
// factors; features with missing entries regress on the observed subjects
// only, and a feature with no observed entries falls back to its prior.
// A Cholesky failure is retried once with +1e-10 on the diagonal, then rethrown.
void update_loadings_rows(ModelState& s, const MultiviewDataset& data_z,
                          const HyperParams& hyper, const SweepContext& ctx);

// Joint draw of [response intercept, shared coefficients, specific coefficients].
void update_response_coefs(ModelState& s, const MultiviewDataset& data_z,
                           const HyperParams& hyper, const SweepContext& ctx);

// Idiosyncratic variances from their inverse-gamma conditionals; residual sums
// run over observed entries only. The response variance is drawn when
// `supervised` is set.
void update_variances(ModelState& s, const MultiviewDataset& data_z,
                      const HyperParams& hyper, bool supervised, const SweepContext& ctx);

// Joint draw of the concatenated factors [eta_i, phi_1i, ..., phi_Mi] from the
// block-precision conditional. The precision is shared by all subjects with a
// common observation pattern, so it is factorized once per pattern and reused.
// Includes the response terms whenever the state's coefficient blocks are
// nonzero; a supervised chain passes complete-response data.
void update_factors_supervised(ModelState& s, const MultiviewDataset& data_z,
                               const SweepContext& ctx);

// Unsupervised alternative: shared factors from the conditional with the
// specific factors integrated out (per-view covariance Gamma Gamma^T + diag),
// then specific factors given the shared draw. Low-rank solves keep the
// per-view cost at O(p_m K_m^2 + p_m K) instead of cubic in total rank.
void update_factors_collapsed(ModelState& s, const MultiviewDataset& data_z,
                              const SweepContext& ctx);

// Number of subjects with at least one observed entry in view m, and the
// membership-update temperature min(n_eff, p_m) / p_m.
Eigen::Index effective_view_subjects(const MultiviewDataset& data_z, int m);
double membership_temperature(const MultiviewDataset& data_z, int m);

// Cross-view coupled slab probabilities (views x K): the prior chance that a
// column is slab in view m and in at least one other view, computed from the
// current sticks. Consumed by the FULLD variant's membership update.
Eigen::MatrixXd fulld_activation_probabilities(const ModelState& s);

// Column membership labels for shared and specific loadings (collapsed over
// the slab variances), then the response activation bits with the common slab
// variance integrated out given the other active coefficients. The likelihood
// log-ratio of each membership draw is raised to the view's temperature when
// `tempering` is on; a temperature of exactly 1 reproduces the untempered
// probabilities bit for bit.
void update_memberships(ModelState& s, const MultiviewDataset& data_z,
                        const HyperParams& hyper, PriorVariant variant,
                        bool tempering, bool supervised, const SweepContext& ctx);

// Stick-breaking fractions from their Beta conditionals, the slab-activation
// weight from its Beta conditional, then every column variance: spike value
// when the column is in the spike group, inverse-gamma slab draw otherwise.
// Restores the indicator/hypervariance consistency invariant.
void update_sticks_and_hypervariances(ModelState& s, const HyperParams& hyper,
                                      bool supervised, const SweepContext& ctx);

// Rank adaptation: with probability exp(d0 + d1 t) once t >= t_adapt, drop the
// prunable shared columns (active in < 2 views for DCUSP/FULLD, in 0 views for
// ICUSP/NAIVE) when more than one is prunable, otherwise grow by one; same
// pattern per specific block with the spike/slab rule. Dropped columns leave
// every aligned array simultaneously; the appended buffer column is drawn from
// the spike with a fresh stick. Ranks stay in [1, bound]. Returns whether the
// adaptation fired.
bool adapt_ranks(ModelState& s, const ModelConfig& cfg, const SweepContext& ctx);
// The unconditional rank-adaptation move (no probability gate); exposed so the
// drop/grow mechanics can be exercised deterministically.
void apply_rank_adaptation(ModelState& s, const ModelConfig& cfg, const SweepContext& ctx);

// Draws of the missing entries from their observation model given the current
// state; observed entries are copied through. These draws feed no other
// update.
std::vector<Eigen::MatrixXd> impute_missing(const ModelState& s, const MultiviewDataset& data_z,
                                            const SweepContext& ctx);

// Ancestral draws from the generative model at fixed truncation: a state from
// the prior (ranks pinned at the bounds), and a complete dataset from the
// observation model given a state. `replicate` separates repeated draws.
ModelState draw_state_from_prior(const ModelConfig& cfg, Eigen::Index n,
                                 const std::vector<Eigen::Index>& p,
                                 std::uint64_t seed, std::int64_t replicate);
MultiviewDataset draw_data_given_state(const ModelState& s, bool with_response,
                                       std::uint64_t seed, std::int64_t replicate);

// Zeroes the response block (intercept, coefficients, activation bits; spike
// variances, unit response variance) so unsupervised chains archive a
// deterministic response block.
void zero_response_block(ModelState& s, const HyperParams& hyper);

struct RunOptions {
  std::string out_dir;  // archive directory (created)
  const StandardizationRecord* standardization = nullptr;  // archived when given
  // progress hook; by default a line goes to stderr every mcmc.log_every sweeps
  std::function<void(std::int64_t iteration, const ModelState& s)> progress;
  bool quiet = false;
};

// One full chain: init, sweeps in fixed step order, rank trajectory every
// iteration, thinned states (iterations burnin + thin, burnin + 2 thin, ...),
// config snapshot and wall-clock seconds in the archive. Numerical failures
// abort with the iteration index and step name attached.
ChainArchive run_chain(const ModelConfig& cfg, const MultiviewDataset& data_z,
                       const RunOptions& opts);

}  // namespace mvfr
