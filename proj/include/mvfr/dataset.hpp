#pragma once
#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mvfr {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct CsvOptions {
  char delimiter = ',';
};

// M feature matrices on shared subjects, optional response, per-entry
// observation mask (true = observed; masked entries hold NaN and are never
// read as data).
struct MultiviewDataset {
  std::vector<Eigen::MatrixXd> views;   // each n x p_m
  std::vector<BoolMatrix> observed;     // same shapes
  Eigen::VectorXd response;             // empty when absent
  std::vector<char> response_observed;  // parallel to response
  std::vector<std::string> subject_ids;
  std::vector<std::vector<std::string>> feature_names;

  int n_views() const { return static_cast<int>(views.size()); }
  Eigen::Index n() const { return views.empty() ? 0 : views[0].rows(); }
  Eigen::Index p(int m) const { return views[static_cast<std::size_t>(m)].cols(); }
  bool has_response() const { return response.size() > 0; }
  bool response_complete() const;

  // structural invariants; supervised additionally demands a complete response
  void validate(bool supervised = false) const;
};

bool same_data(const MultiviewDataset& a, const MultiviewDataset& b);

// One CSV per view (header row of feature names; empty cell or "NA" = missing)
// plus an optional single-column response CSV.
MultiviewDataset load_dataset(const std::vector<std::string>& view_paths,
                              const std::optional<std::string>& response_path = std::nullopt,
                              const CsvOptions& opts = {});
void write_dataset(const MultiviewDataset& data, const std::vector<std::string>& view_paths,
                   const std::optional<std::string>& response_path = std::nullopt,
                   const CsvOptions& opts = {});

// Per-feature (and response) centering/scaling, estimated over observed
// entries with the n-1 denominator.
struct StandardizationRecord {
  std::vector<Eigen::VectorXd> mean, sd;  // per view, length p_m
  double response_mean = 0.0;
  double response_sd = 1.0;
  bool standardizes_response = false;
};

// Estimate location/scale from `data` and return the transformed copy; every
// feature needs >= 2 observed values and nonzero spread.
std::pair<MultiviewDataset, StandardizationRecord> standardize(const MultiviewDataset& data);
// Transform new data with a previously estimated record (shapes must match).
MultiviewDataset apply_standardization(const MultiviewDataset& data,
                                       const StandardizationRecord& rec);
// Inverse transform; unstandardize(apply_standardization(d)) == d on observed entries.
MultiviewDataset unstandardize(const MultiviewDataset& data, const StandardizationRecord& rec);

}  // namespace mvfr
