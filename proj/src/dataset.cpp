#include "mvfr/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "mvfr/errors.hpp"

namespace mvfr {

namespace {

constexpr double kMaskedValue = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

bool is_missing_token(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_cell(const std::string& cell, const std::string& path, std::size_t row,
                  std::size_t col) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0')
    throw DataError(path + ": non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                    ", column " + std::to_string(col));
  return v;
}

// header + numeric body; returns (values with NaN holes, observation mask, names)
void load_table(const std::string& path, const CsvOptions& opts, Eigen::MatrixXd& values,
                BoolMatrix& mask, std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file (expected a header row)");
  names = split_row(line, opts.delimiter);
  const std::size_t p = names.size();
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line, opts.delimiter);
    if (cells.size() != p)
      throw DataError(path + ": row " + std::to_string(lineno) + " has " +
                      std::to_string(cells.size()) + " cells, header has " + std::to_string(p));
    std::vector<double> vals(p);
    std::vector<bool> obs(p);
    for (std::size_t j = 0; j < p; ++j) {
      if (is_missing_token(cells[j])) {
        vals[j] = kMaskedValue;
        obs[j] = false;
      } else {
        vals[j] = parse_cell(cells[j], path, lineno, j + 1);
        obs[j] = true;
      }
    }
    rows.push_back(std::move(vals));
    seen.push_back(std::move(obs));
  }
  values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  mask.resize(values.rows(), values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      mask(i, j) = seen[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
}

std::string format_cell(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool MultiviewDataset::response_complete() const {
  for (char c : response_observed)
    if (!c) return false;
  return has_response();
}

void MultiviewDataset::validate(bool supervised) const {
  if (views.empty()) throw DataError("dataset needs at least one view");
  if (views.size() != observed.size() || views.size() != feature_names.size())
    throw DataError("dataset views, masks and names are out of step");
  const Eigen::Index rows = views[0].rows();
  for (std::size_t m = 0; m < views.size(); ++m) {
    if (views[m].rows() != rows)
      throw DataError("view " + std::to_string(m + 1) + " has " + std::to_string(views[m].rows()) +
                      " subjects, view 1 has " + std::to_string(rows));
    if (views[m].cols() < 1) throw DataError("view " + std::to_string(m + 1) + " has no features");
    if (views[m].rows() != observed[m].rows() || views[m].cols() != observed[m].cols())
      throw DataError("view " + std::to_string(m + 1) + " mask shape mismatch");
    if (feature_names[m].size() != static_cast<std::size_t>(views[m].cols()))
      throw DataError("view " + std::to_string(m + 1) + " feature-name count mismatch");
  }
  if (rows < 1) throw DataError("dataset has no subjects");
  if (has_response()) {
    if (response.size() != rows) throw DataError("response length does not match the views");
    if (response_observed.size() != static_cast<std::size_t>(rows))
      throw DataError("response mask length mismatch");
  }
  if (!subject_ids.empty() && subject_ids.size() != static_cast<std::size_t>(rows))
    throw DataError("subject-id count does not match the views");
  if (supervised) {
    if (!has_response()) throw DataError("supervised fit requested but no response given");
    if (!response_complete()) throw DataError("supervised fit requires a complete response");
  }
}

bool same_data(const MultiviewDataset& a, const MultiviewDataset& b) {
  if (a.n_views() != b.n_views() || a.n() != b.n()) return false;
  for (int m = 0; m < a.n_views(); ++m) {
    const auto mi = static_cast<std::size_t>(m);
    if (a.views[mi].cols() != b.views[mi].cols()) return false;
    if (a.feature_names[mi] != b.feature_names[mi]) return false;
    if ((a.observed[mi] != b.observed[mi]).any()) return false;
    for (Eigen::Index i = 0; i < a.views[mi].rows(); ++i)
      for (Eigen::Index j = 0; j < a.views[mi].cols(); ++j)
        if (a.observed[mi](i, j) && a.views[mi](i, j) != b.views[mi](i, j)) return false;
  }
  if (a.has_response() != b.has_response()) return false;
  if (a.has_response()) {
    if (a.response_observed != b.response_observed) return false;
    for (Eigen::Index i = 0; i < a.response.size(); ++i)
      if (a.response_observed[static_cast<std::size_t>(i)] && a.response(i) != b.response(i))
        return false;
  }
  return true;
}

MultiviewDataset load_dataset(const std::vector<std::string>& view_paths,
                              const std::optional<std::string>& response_path,
                              const CsvOptions& opts) {
  if (view_paths.empty()) throw DataError("no view files given");
  MultiviewDataset data;
  for (const auto& path : view_paths) {
    Eigen::MatrixXd values;
    BoolMatrix mask;
    std::vector<std::string> names;
    load_table(path, opts, values, mask, names);
    if (!data.views.empty() && values.rows() != data.n())
      throw DataError(path + ": " + std::to_string(values.rows()) +
                      " rows, but earlier views have " + std::to_string(data.n()));
    data.views.push_back(std::move(values));
    data.observed.push_back(std::move(mask));
    data.feature_names.push_back(std::move(names));
  }
  if (response_path) {
    Eigen::MatrixXd values;
    BoolMatrix mask;
    std::vector<std::string> names;
    load_table(*response_path, opts, values, mask, names);
    if (values.cols() != 1)
      throw DataError(*response_path + ": response file must have exactly one column");
    if (values.rows() != data.n())
      throw DataError(*response_path + ": response has " + std::to_string(values.rows()) +
                      " rows, views have " + std::to_string(data.n()));
    data.response = values.col(0);
    data.response_observed.resize(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      data.response_observed[static_cast<std::size_t>(i)] = mask(i, 0);
  }
  data.subject_ids.resize(static_cast<std::size_t>(data.n()));
  for (Eigen::Index i = 0; i < data.n(); ++i)
    data.subject_ids[static_cast<std::size_t>(i)] = std::to_string(i + 1);
  data.validate();
  return data;
}

void write_dataset(const MultiviewDataset& data, const std::vector<std::string>& view_paths,
                   const std::optional<std::string>& response_path, const CsvOptions& opts) {
  data.validate();
  if (view_paths.size() != data.views.size())
    throw DataError("need one output path per view");
  for (std::size_t m = 0; m < data.views.size(); ++m) {
    std::ofstream out(view_paths[m], std::ios::binary);
    if (!out) throw DataError("cannot write data file: " + view_paths[m]);
    const auto& names = data.feature_names[m];
    for (std::size_t j = 0; j < names.size(); ++j)
      out << (j ? std::string(1, opts.delimiter) : "") << names[j];
    out << "\n";
    const auto& vals = data.views[m];
    const auto& mask = data.observed[m];
    for (Eigen::Index i = 0; i < vals.rows(); ++i) {
      for (Eigen::Index j = 0; j < vals.cols(); ++j) {
        if (j) out << opts.delimiter;
        if (mask(i, j)) out << format_cell(vals(i, j));
        else out << "NA";
      }
      out << "\n";
    }
  }
  if (response_path) {
    if (!data.has_response()) throw DataError("no response to write");
    std::ofstream out(*response_path, std::ios::binary);
    if (!out) throw DataError("cannot write data file: " + *response_path);
    out << "y\n";
    for (Eigen::Index i = 0; i < data.response.size(); ++i) {
      if (data.response_observed[static_cast<std::size_t>(i)])
        out << format_cell(data.response(i));
      else
        out << "NA";
      out << "\n";
    }
  }
}

std::pair<MultiviewDataset, StandardizationRecord> standardize(const MultiviewDataset& data) {
  data.validate();
  StandardizationRecord rec;
  rec.mean.resize(data.views.size());
  rec.sd.resize(data.views.size());
  for (std::size_t m = 0; m < data.views.size(); ++m) {
    const auto& vals = data.views[m];
    const auto& mask = data.observed[m];
    rec.mean[m].resize(vals.cols());
    rec.sd[m].resize(vals.cols());
    for (Eigen::Index j = 0; j < vals.cols(); ++j) {
      double sum = 0.0;
      Eigen::Index cnt = 0;
      for (Eigen::Index i = 0; i < vals.rows(); ++i)
        if (mask(i, j)) {
          sum += vals(i, j);
          ++cnt;
        }
      const std::string& name = data.feature_names[m][static_cast<std::size_t>(j)];
      if (cnt < 2)
        throw DataError("feature '" + name + "' (view " + std::to_string(m + 1) +
                        ") has fewer than two observed values");
      const double mean = sum / static_cast<double>(cnt);
      double ss = 0.0;
      for (Eigen::Index i = 0; i < vals.rows(); ++i)
        if (mask(i, j)) ss += (vals(i, j) - mean) * (vals(i, j) - mean);
      const double sd = std::sqrt(ss / static_cast<double>(cnt - 1));
      if (!(sd > 0.0))
        throw DataError("feature '" + name + "' (view " + std::to_string(m + 1) +
                        ") is constant over its observed entries");
      rec.mean[m](j) = mean;
      rec.sd[m](j) = sd;
    }
  }
  if (data.has_response()) {
    double sum = 0.0;
    Eigen::Index cnt = 0;
    for (Eigen::Index i = 0; i < data.response.size(); ++i)
      if (data.response_observed[static_cast<std::size_t>(i)]) {
        sum += data.response(i);
        ++cnt;
      }
    if (cnt < 2) throw DataError("response has fewer than two observed values");
    const double mean = sum / static_cast<double>(cnt);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < data.response.size(); ++i)
      if (data.response_observed[static_cast<std::size_t>(i)])
        ss += (data.response(i) - mean) * (data.response(i) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(cnt - 1));
    if (!(sd > 0.0)) throw DataError("response is constant over its observed entries");
    rec.response_mean = mean;
    rec.response_sd = sd;
    rec.standardizes_response = true;
  }
  return {apply_standardization(data, rec), rec};
}

MultiviewDataset apply_standardization(const MultiviewDataset& data,
                                       const StandardizationRecord& rec) {
  data.validate();
  if (rec.mean.size() != data.views.size())
    throw DataError("standardization record does not match the dataset's view count");
  MultiviewDataset out = data;
  for (std::size_t m = 0; m < out.views.size(); ++m) {
    if (rec.mean[m].size() != out.views[m].cols())
      throw DataError("standardization record does not match view " + std::to_string(m + 1));
    auto& vals = out.views[m];
    const auto& mask = out.observed[m];
    for (Eigen::Index j = 0; j < vals.cols(); ++j)
      for (Eigen::Index i = 0; i < vals.rows(); ++i)
        vals(i, j) = mask(i, j) ? (vals(i, j) - rec.mean[m](j)) / rec.sd[m](j) : kMaskedValue;
  }
  if (out.has_response() && rec.standardizes_response) {
    for (Eigen::Index i = 0; i < out.response.size(); ++i)
      out.response(i) = out.response_observed[static_cast<std::size_t>(i)]
                            ? (out.response(i) - rec.response_mean) / rec.response_sd
                            : kMaskedValue;
  }
  return out;
}

MultiviewDataset unstandardize(const MultiviewDataset& data, const StandardizationRecord& rec) {
  data.validate();
  if (rec.mean.size() != data.views.size())
    throw DataError("standardization record does not match the dataset's view count");
  MultiviewDataset out = data;
  for (std::size_t m = 0; m < out.views.size(); ++m) {
    auto& vals = out.views[m];
    const auto& mask = out.observed[m];
    for (Eigen::Index j = 0; j < vals.cols(); ++j)
      for (Eigen::Index i = 0; i < vals.rows(); ++i)
        vals(i, j) = mask(i, j) ? vals(i, j) * rec.sd[m](j) + rec.mean[m](j) : kMaskedValue;
  }
  if (out.has_response() && rec.standardizes_response) {
    for (Eigen::Index i = 0; i < out.response.size(); ++i)
      out.response(i) = out.response_observed[static_cast<std::size_t>(i)]
                            ? out.response(i) * rec.response_sd + rec.response_mean
                            : kMaskedValue;
  }
  return out;
}

}  // namespace mvfr
