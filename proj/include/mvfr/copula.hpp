#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mvfr/dataset.hpp"

namespace mvfr {

// Scaled empirical CDF of one feature: F(t) = #{observed x <= t} / (n_obs + 1),
// kept as sorted distinct values with their max ranks; zscores caches the
// probit of each rank so latent-scale comparisons are exact.
struct FeatureMargin {
  std::vector<double> values;        // sorted distinct observed values
  std::vector<std::int64_t> ranks;   // #{observed <= values[k]} (strictly increasing)
  std::vector<double> zscores;       // probit(ranks[k] / (n_obs + 1))
  std::int64_t n_obs = 0;

  // latent z for a raw value; values outside the observed range take the
  // extreme support point's z (out-of-support clamp)
  double to_z(double x) const;
  // pseudo-inverse: smallest support value whose ECDF reaches Phi(z), clamped
  // to the support extremes; from_z(to_z(x)) == x for every observed x
  double from_z(double z) const;
};

struct MarginalModel {
  std::vector<std::vector<FeatureMargin>> margins;  // [view][feature]
};

// Estimate a margin from the observed entries of one column. Throws when
// nothing is observed or when a value repeats often enough to look discrete
// (more than max(2, 5% of n_obs) copies).
FeatureMargin fit_margin(const std::vector<double>& observed_values, const std::string& label);

// Map every observed feature entry to the latent-normal scale (response and
// masks pass through untouched).
std::pair<MultiviewDataset, MarginalModel> to_latent(const MultiviewDataset& data);
// Transform new data with previously fitted margins (prediction path).
MultiviewDataset apply_margins(const MultiviewDataset& data, const MarginalModel& model);
// Back-transform one latent value for feature j of view m.
double from_latent(const MarginalModel& model, int view, Eigen::Index feature, double z);

// Plain-text persistence (ranks stored as integers; zscores rebuilt on load,
// so a save/load round-trip is bit-identical).
void save_margins(const std::string& path, const MarginalModel& model);
MarginalModel load_margins(const std::string& path);

}  // namespace mvfr
