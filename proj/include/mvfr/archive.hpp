#pragma once
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mvfr/dataset.hpp"
#include "mvfr/state.hpp"

namespace mvfr {

// Chain archive directory:
//   manifest.json         seed, family, dims, iteration counts, wall clock
//   config.snapshot.toml  every effective setting of the run
//   params.bin            flat little-endian float64 arrays (matrices column-major)
//   params.idx            one line per array: name iter dims offset count
//   ranks.csv             iteration,K[,K_1..K_M] for every iteration
// Run-constant arrays (standardization record, simulation truth) use iter = -1.

struct ArchiveEntry {
  std::string name;
  std::int64_t iter = 0;
  std::vector<std::int64_t> dims;
  std::uint64_t offset = 0;  // in float64 elements
  std::uint64_t count = 0;
};

struct RankTrajectory {
  std::vector<std::int64_t> iteration;
  std::vector<int> K;
  std::vector<std::vector<int>> K_m;  // per-iteration per-view specific ranks (empty for JFR)
};

class ArchiveWriter {
 public:
  explicit ArchiveWriter(const std::string& dir);  // creates the directory

  void put(const std::string& name, std::int64_t iter, std::vector<std::int64_t> dims,
           const double* data, std::size_t count);
  void put_scalar(const std::string& name, std::int64_t iter, double value);
  void put_vector(const std::string& name, std::int64_t iter, const Eigen::VectorXd& v);
  void put_matrix(const std::string& name, std::int64_t iter, const Eigen::MatrixXd& m);

  // all parameters of one kept state; slim skips the factor-score matrices
  void put_state(const ModelState& s, std::int64_t iter, bool slim = false);
  void put_standardization(const StandardizationRecord& rec);
  void put_ranks(const RankTrajectory& ranks);
  void put_config(const ConfigTree& snapshot);

  nlohmann::json& manifest() { return manifest_; }
  const std::string& directory() const { return dir_; }

  void finish();  // writes params.idx and manifest.json; no puts afterwards

 private:
  std::string dir_;
  std::ofstream bin_;
  std::uint64_t offset_ = 0;
  std::vector<ArchiveEntry> entries_;
  nlohmann::json manifest_;
  bool finished_ = false;
};

class ChainArchive {
 public:
  static ChainArchive open(const std::string& dir);

  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::vector<std::int64_t> kept_iterations() const;  // sorted distinct iters >= 0
  bool has(const std::string& name, std::int64_t iter) const;

  std::vector<double> raw(const std::string& name, std::int64_t iter) const;
  double scalar(const std::string& name, std::int64_t iter) const;
  Eigen::VectorXd vector(const std::string& name, std::int64_t iter) const;
  Eigen::MatrixXd matrix(const std::string& name, std::int64_t iter) const;

  ModelState state_at(std::int64_t iter) const;
  StandardizationRecord standardization() const;
  RankTrajectory ranks() const;
  ConfigTree config_snapshot() const;
  const nlohmann::json& manifest() const { return manifest_; }
  const std::string& directory() const { return dir_; }

 private:
  const ArchiveEntry& find(const std::string& name, std::int64_t iter) const;
  std::string dir_;
  nlohmann::json manifest_;
  std::vector<ArchiveEntry> entries_;
  std::map<std::pair<std::string, std::int64_t>, std::size_t> index_;
};

}  // namespace mvfr
