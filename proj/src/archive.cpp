#include "mvfr/archive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "mvfr/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "archive files are little-endian; big-endian hosts are unsupported");

namespace mvfr {

namespace {

std::string view_prefix(int m) { return "v" + std::to_string(m + 1) + "/"; }

std::string format_dims(const std::vector<std::int64_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i)
    out += (i ? "x" : "") + std::to_string(dims[i]);
  return out;
}

std::vector<std::int64_t> parse_dims(const std::string& text, const std::string& path) {
  std::vector<std::int64_t> dims;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto x = text.find('x', start);
    const std::string tok = text.substr(start, x == std::string::npos ? x : x - start);
    char* end = nullptr;
    dims.push_back(std::strtoll(tok.c_str(), &end, 10));
    if (end == tok.c_str() || *end != '\0' || dims.back() < 0)
      throw DataError(path + ": bad dims field '" + text + "'");
    if (x == std::string::npos) break;
    start = x + 1;
  }
  return dims;
}

std::vector<double> bits_to_doubles(const std::vector<char>& bits) {
  std::vector<double> out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? 1.0 : 0.0;
  return out;
}

std::vector<double> ints_to_doubles(const std::vector<int>& xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = static_cast<double>(xs[i]);
  return out;
}

}  // namespace

ArchiveWriter::ArchiveWriter(const std::string& dir) : dir_(dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw DataError("cannot create archive directory " + dir_ + ": " + ec.message());
  bin_.open(dir_ + "/params.bin", std::ios::binary | std::ios::trunc);
  if (!bin_) throw DataError("cannot write " + dir_ + "/params.bin");
}

void ArchiveWriter::put(const std::string& name, std::int64_t iter,
                        std::vector<std::int64_t> dims, const double* data, std::size_t count) {
  if (finished_) throw DataError("archive already finished: " + dir_);
  if (name.empty() || name.find(' ') != std::string::npos)
    throw DataError("bad archive entry name '" + name + "'");
  std::uint64_t expected = 1;
  for (auto d : dims) expected *= static_cast<std::uint64_t>(d);
  if (expected != count)
    throw DataError("entry '" + name + "': dims disagree with element count");
  bin_.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(count * sizeof(double)));
  if (!bin_) throw DataError("write failure on " + dir_ + "/params.bin");
  entries_.push_back({name, iter, std::move(dims), offset_, count});
  offset_ += count;
}

void ArchiveWriter::put_scalar(const std::string& name, std::int64_t iter, double value) {
  put(name, iter, {1}, &value, 1);
}

void ArchiveWriter::put_vector(const std::string& name, std::int64_t iter,
                               const Eigen::VectorXd& v) {
  put(name, iter, {v.size()}, v.data(), static_cast<std::size_t>(v.size()));
}

void ArchiveWriter::put_matrix(const std::string& name, std::int64_t iter,
                               const Eigen::MatrixXd& m) {
  put(name, iter, {m.rows(), m.cols()}, m.data(), static_cast<std::size_t>(m.size()));
}

void ArchiveWriter::put_state(const ModelState& s, std::int64_t iter, bool slim) {
  for (int m = 0; m < s.n_views(); ++m) {
    const auto& v = s.views[static_cast<std::size_t>(m)];
    const std::string pre = view_prefix(m);
    put_vector(pre + "mu", iter, v.mu);
    put_matrix(pre + "Lambda", iter, v.Lambda);
    put_vector(pre + "sigma2", iter, v.sigma2);
    put_vector(pre + "tau2", iter, v.tau2);
    const auto zeta = ints_to_doubles(v.zeta);
    put(pre + "zeta", iter, {static_cast<std::int64_t>(zeta.size())}, zeta.data(), zeta.size());
    put_vector(pre + "nu", iter, v.nu);
    if (v.K_m() > 0) {
      put_matrix(pre + "Gamma", iter, v.Gamma);
      put_vector(pre + "chi2", iter, v.chi2);
      const auto delta = ints_to_doubles(v.delta);
      put(pre + "delta", iter, {static_cast<std::int64_t>(delta.size())}, delta.data(),
          delta.size());
      put_vector(pre + "rho", iter, v.rho);
      if (!slim) put_matrix(pre + "phi", iter, v.phi);
      put_vector(pre + "theta_m", iter, v.theta_m);
      const auto rm = bits_to_doubles(v.r_m);
      put(pre + "r_m", iter, {static_cast<std::int64_t>(rm.size())}, rm.data(), rm.size());
      put_vector(pre + "psi2_m", iter, v.psi2_m);
    }
  }
  if (!slim) put_matrix("eta", iter, s.eta);
  put_scalar("mu_y", iter, s.mu_y);
  put_vector("theta", iter, s.theta);
  const auto rbits = bits_to_doubles(s.r);
  put("r", iter, {static_cast<std::int64_t>(rbits.size())}, rbits.data(), rbits.size());
  put_vector("psi2", iter, s.psi2);
  put_scalar("psi2_o", iter, s.psi2_o);
  put_scalar("sigma2_y", iter, s.sigma2_y);
  put_scalar("xi", iter, s.xi);
}

void ArchiveWriter::put_standardization(const StandardizationRecord& rec) {
  for (std::size_t m = 0; m < rec.mean.size(); ++m) {
    const std::string pre = "standardize/" + view_prefix(static_cast<int>(m));
    put_vector(pre + "mean", -1, rec.mean[m]);
    put_vector(pre + "sd", -1, rec.sd[m]);
  }
  if (rec.standardizes_response) {
    Eigen::VectorXd y(2);
    y << rec.response_mean, rec.response_sd;
    put_vector("standardize/response", -1, y);
  }
}

void ArchiveWriter::put_ranks(const RankTrajectory& ranks) {
  std::ofstream out(dir_ + "/ranks.csv", std::ios::binary);
  if (!out) throw DataError("cannot write " + dir_ + "/ranks.csv");
  const std::size_t M = ranks.K_m.empty() ? 0 : ranks.K_m.front().size();
  out << "iteration,K";
  for (std::size_t m = 0; m < M; ++m) out << ",K_" << m + 1;
  out << "\n";
  for (std::size_t t = 0; t < ranks.iteration.size(); ++t) {
    out << ranks.iteration[t] << "," << ranks.K[t];
    for (std::size_t m = 0; m < M; ++m) out << "," << ranks.K_m[t][m];
    out << "\n";
  }
}

void ArchiveWriter::put_config(const ConfigTree& snapshot) {
  snapshot.write_file(dir_ + "/config.snapshot.toml");
}

void ArchiveWriter::finish() {
  if (finished_) return;
  bin_.close();
  std::ofstream idx(dir_ + "/params.idx", std::ios::binary);
  if (!idx) throw DataError("cannot write " + dir_ + "/params.idx");
  for (const auto& e : entries_)
    idx << e.name << " " << e.iter << " " << format_dims(e.dims) << " " << e.offset << " "
        << e.count << "\n";
  manifest_["format"] = "mvfr-archive";
  manifest_["format_version"] = 1;
  manifest_["byte_order"] = "little-endian";
  manifest_["entry_count"] = entries_.size();
  std::ofstream mf(dir_ + "/manifest.json", std::ios::binary);
  if (!mf) throw DataError("cannot write " + dir_ + "/manifest.json");
  mf << manifest_.dump(2) << "\n";
  finished_ = true;
}

ChainArchive ChainArchive::open(const std::string& dir) {
  ChainArchive a;
  a.dir_ = dir;
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw DataError("cannot open archive (no manifest.json in " + dir + ")");
  try {
    mf >> a.manifest_;
  } catch (const std::exception& e) {
    throw DataError(dir + "/manifest.json: " + e.what());
  }
  if (a.manifest_.value("format", "") != "mvfr-archive")
    throw DataError(dir + ": not a chain archive (bad format tag)");

  std::ifstream idx(dir + "/params.idx");
  if (!idx) throw DataError("cannot open " + dir + "/params.idx");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(idx, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ArchiveEntry e;
    std::string dims;
    if (!(ss >> e.name >> e.iter >> dims >> e.offset >> e.count))
      throw DataError(dir + "/params.idx: malformed line " + std::to_string(lineno));
    e.dims = parse_dims(dims, dir + "/params.idx");
    std::uint64_t expected = 1;
    for (auto d : e.dims) expected *= static_cast<std::uint64_t>(d);
    if (expected != e.count)
      throw DataError(dir + "/params.idx: dims/count mismatch at line " + std::to_string(lineno));
    a.index_[{e.name, e.iter}] = a.entries_.size();
    a.entries_.push_back(std::move(e));
  }
  std::ifstream bin(dir + "/params.bin", std::ios::binary);
  if (!bin) throw DataError("cannot open " + dir + "/params.bin");
  return a;
}

std::vector<std::int64_t> ChainArchive::kept_iterations() const {
  std::set<std::int64_t> iters;
  for (const auto& e : entries_)
    if (e.iter >= 0) iters.insert(e.iter);
  return {iters.begin(), iters.end()};
}

bool ChainArchive::has(const std::string& name, std::int64_t iter) const {
  return index_.count({name, iter}) > 0;
}

const ArchiveEntry& ChainArchive::find(const std::string& name, std::int64_t iter) const {
  const auto it = index_.find({name, iter});
  if (it == index_.end())
    throw DataError(dir_ + ": no archive entry '" + name + "' at iteration " +
                    std::to_string(iter));
  return entries_[it->second];
}

std::vector<double> ChainArchive::raw(const std::string& name, std::int64_t iter) const {
  const auto& e = find(name, iter);
  std::ifstream bin(dir_ + "/params.bin", std::ios::binary);
  if (!bin) throw DataError("cannot open " + dir_ + "/params.bin");
  bin.seekg(static_cast<std::streamoff>(e.offset * sizeof(double)));
  std::vector<double> out(e.count);
  bin.read(reinterpret_cast<char*>(out.data()),
           static_cast<std::streamsize>(e.count * sizeof(double)));
  if (static_cast<std::uint64_t>(bin.gcount()) != e.count * sizeof(double))
    throw DataError(dir_ + "/params.bin: truncated read for entry '" + name + "'");
  return out;
}

double ChainArchive::scalar(const std::string& name, std::int64_t iter) const {
  const auto data = raw(name, iter);
  if (data.size() != 1)
    throw DataError("archive entry '" + name + "' is not a scalar");
  return data[0];
}

Eigen::VectorXd ChainArchive::vector(const std::string& name, std::int64_t iter) const {
  const auto data = raw(name, iter);
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

Eigen::MatrixXd ChainArchive::matrix(const std::string& name, std::int64_t iter) const {
  const auto& e = find(name, iter);
  if (e.dims.size() != 2)
    throw DataError("archive entry '" + name + "' is not a matrix");
  const auto data = raw(name, iter);
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), e.dims[0], e.dims[1]);
}

ModelState ChainArchive::state_at(std::int64_t iter) const {
  ModelState s;
  s.family = manifest_.value("family", "jafar") == std::string("jfr") ? Family::JFR
                                                                      : Family::JAFAR;
  const int M = manifest_.value("n_views", 0);
  if (M < 1) throw DataError(dir_ + ": manifest lacks n_views");
  s.views.resize(static_cast<std::size_t>(M));
  s.theta = vector("theta", iter);
  s.K = static_cast<int>(s.theta.size());
  for (int m = 0; m < M; ++m) {
    auto& v = s.views[static_cast<std::size_t>(m)];
    const std::string pre = view_prefix(m);
    v.mu = vector(pre + "mu", iter);
    v.Lambda = matrix(pre + "Lambda", iter);
    v.sigma2 = vector(pre + "sigma2", iter);
    v.tau2 = vector(pre + "tau2", iter);
    const auto zeta = raw(pre + "zeta", iter);
    v.zeta.resize(zeta.size());
    for (std::size_t h = 0; h < zeta.size(); ++h)
      v.zeta[h] = static_cast<int>(std::llround(zeta[h]));
    v.nu = vector(pre + "nu", iter);
    if (has(pre + "Gamma", iter)) {
      v.Gamma = matrix(pre + "Gamma", iter);
      v.chi2 = vector(pre + "chi2", iter);
      const auto delta = raw(pre + "delta", iter);
      v.delta.resize(delta.size());
      for (std::size_t h = 0; h < delta.size(); ++h)
        v.delta[h] = static_cast<int>(std::llround(delta[h]));
      v.rho = vector(pre + "rho", iter);
      v.phi = has(pre + "phi", iter) ? matrix(pre + "phi", iter)
                                     : Eigen::MatrixXd(0, v.Gamma.cols());
      v.theta_m = vector(pre + "theta_m", iter);
      const auto rm = raw(pre + "r_m", iter);
      v.r_m.resize(rm.size());
      for (std::size_t h = 0; h < rm.size(); ++h) v.r_m[h] = rm[h] != 0.0 ? 1 : 0;
      v.psi2_m = vector(pre + "psi2_m", iter);
    } else {
      v.Gamma.resize(0, 0);
      v.phi.resize(0, 0);
      v.chi2.resize(0);
      v.rho.resize(0);
      v.theta_m.resize(0);
      v.psi2_m.resize(0);
    }
  }
  s.eta = has("eta", iter) ? matrix("eta", iter) : Eigen::MatrixXd(0, s.K);
  s.mu_y = scalar("mu_y", iter);
  const auto rbits = raw("r", iter);
  s.r.resize(rbits.size());
  for (std::size_t h = 0; h < rbits.size(); ++h) s.r[h] = rbits[h] != 0.0 ? 1 : 0;
  s.psi2 = vector("psi2", iter);
  s.psi2_o = scalar("psi2_o", iter);
  s.sigma2_y = scalar("sigma2_y", iter);
  s.xi = scalar("xi", iter);
  return s;
}

StandardizationRecord ChainArchive::standardization() const {
  StandardizationRecord rec;
  for (int m = 0;; ++m) {
    const std::string pre = "standardize/" + view_prefix(m);
    if (!has(pre + "mean", -1)) break;
    rec.mean.push_back(vector(pre + "mean", -1));
    rec.sd.push_back(vector(pre + "sd", -1));
  }
  if (rec.mean.empty()) throw DataError(dir_ + ": archive holds no standardization record");
  if (has("standardize/response", -1)) {
    const auto y = vector("standardize/response", -1);
    rec.response_mean = y(0);
    rec.response_sd = y(1);
    rec.standardizes_response = true;
  }
  return rec;
}

RankTrajectory ChainArchive::ranks() const {
  std::ifstream in(dir_ + "/ranks.csv");
  if (!in) throw DataError("cannot open " + dir_ + "/ranks.csv");
  std::string line;
  if (!std::getline(in, line)) throw DataError(dir_ + "/ranks.csv: empty");
  RankTrajectory out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::int64_t> fields;
    while (std::getline(ss, cell, ','))
      fields.push_back(std::strtoll(cell.c_str(), nullptr, 10));
    if (fields.size() < 2)
      throw DataError(dir_ + "/ranks.csv: malformed line " + std::to_string(lineno));
    out.iteration.push_back(fields[0]);
    out.K.push_back(static_cast<int>(fields[1]));
    out.K_m.emplace_back();
    for (std::size_t m = 2; m < fields.size(); ++m)
      out.K_m.back().push_back(static_cast<int>(fields[m]));
  }
  return out;
}

ConfigTree ChainArchive::config_snapshot() const {
  return ConfigTree::parse_file(dir_ + "/config.snapshot.toml");
}

}  // namespace mvfr
