#include "mvfr/copula.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mvfr/errors.hpp"
#include "mvfr/stats.hpp"

namespace mvfr {

double FeatureMargin::to_z(double x) const {
  // number of distinct support values <= x
  const auto it = std::upper_bound(values.begin(), values.end(), x);
  const std::size_t idx = static_cast<std::size_t>(it - values.begin());
  if (idx == 0) return zscores.front();  // below support: clamp to the minimum's z
  return zscores[idx - 1];
}

double FeatureMargin::from_z(double z) const {
  const auto it = std::lower_bound(zscores.begin(), zscores.end(), z);
  if (it == zscores.end()) return values.back();  // above support: clamp to the maximum
  return values[static_cast<std::size_t>(it - zscores.begin())];
}

FeatureMargin fit_margin(const std::vector<double>& observed_values, const std::string& label) {
  if (observed_values.empty())
    throw DataError("feature '" + label + "' has no observed entries to fit a margin");
  std::vector<double> sorted = observed_values;
  std::sort(sorted.begin(), sorted.end());
  FeatureMargin margin;
  margin.n_obs = static_cast<std::int64_t>(sorted.size());
  const auto discrete_cutoff =
      std::max<std::int64_t>(2, static_cast<std::int64_t>(0.05 * static_cast<double>(margin.n_obs)));
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (static_cast<std::int64_t>(j - i) > discrete_cutoff)
      throw DataError("feature '" + label + "' looks discrete (value " +
                      std::to_string(sorted[i]) + " appears " + std::to_string(j - i) +
                      " times); the latent-normal margin needs continuous features");
    margin.values.push_back(sorted[i]);
    margin.ranks.push_back(static_cast<std::int64_t>(j));  // ties share the max rank
    i = j;
  }
  const double denom = static_cast<double>(margin.n_obs + 1);
  margin.zscores.resize(margin.ranks.size());
  for (std::size_t k = 0; k < margin.ranks.size(); ++k)
    margin.zscores[k] = std_normal_quantile(static_cast<double>(margin.ranks[k]) / denom);
  return margin;
}

std::pair<MultiviewDataset, MarginalModel> to_latent(const MultiviewDataset& data) {
  data.validate();
  MarginalModel model;
  model.margins.resize(data.views.size());
  MultiviewDataset out = data;
  for (std::size_t m = 0; m < data.views.size(); ++m) {
    const auto& vals = data.views[m];
    const auto& mask = data.observed[m];
    model.margins[m].reserve(static_cast<std::size_t>(vals.cols()));
    for (Eigen::Index j = 0; j < vals.cols(); ++j) {
      std::vector<double> obs;
      obs.reserve(static_cast<std::size_t>(vals.rows()));
      for (Eigen::Index i = 0; i < vals.rows(); ++i)
        if (mask(i, j)) obs.push_back(vals(i, j));
      model.margins[m].push_back(
          fit_margin(obs, data.feature_names[m][static_cast<std::size_t>(j)]));
      const auto& margin = model.margins[m].back();
      for (Eigen::Index i = 0; i < vals.rows(); ++i)
        if (mask(i, j)) out.views[m](i, j) = margin.to_z(vals(i, j));
    }
  }
  return {std::move(out), std::move(model)};
}

MultiviewDataset apply_margins(const MultiviewDataset& data, const MarginalModel& model) {
  data.validate();
  if (model.margins.size() != data.views.size())
    throw DataError("marginal model does not match the dataset's view count");
  MultiviewDataset out = data;
  for (std::size_t m = 0; m < data.views.size(); ++m) {
    if (model.margins[m].size() != static_cast<std::size_t>(data.views[m].cols()))
      throw DataError("marginal model does not match view " + std::to_string(m + 1));
    for (Eigen::Index j = 0; j < data.views[m].cols(); ++j) {
      const auto& margin = model.margins[m][static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < data.views[m].rows(); ++i)
        if (data.observed[m](i, j)) out.views[m](i, j) = margin.to_z(data.views[m](i, j));
    }
  }
  return out;
}

double from_latent(const MarginalModel& model, int view, Eigen::Index feature, double z) {
  return model.margins[static_cast<std::size_t>(view)][static_cast<std::size_t>(feature)].from_z(z);
}

void save_margins(const std::string& path, const MarginalModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write margins file: " + path);
  out << "views " << model.margins.size() << "\n";
  char buf[64];
  for (std::size_t m = 0; m < model.margins.size(); ++m) {
    out << "view " << m << " " << model.margins[m].size() << "\n";
    for (const auto& margin : model.margins[m]) {
      out << margin.n_obs << " " << margin.values.size();
      for (std::size_t k = 0; k < margin.values.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", margin.values[k]);
        out << " " << buf << ":" << margin.ranks[k];
      }
      out << "\n";
    }
  }
}

MarginalModel load_margins(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open margins file: " + path);
  auto bad = [&path]() -> DataError { return DataError("malformed margins file: " + path); };
  std::string tag;
  std::size_t n_views = 0;
  if (!(in >> tag >> n_views) || tag != "views") throw bad();
  MarginalModel model;
  model.margins.resize(n_views);
  for (std::size_t m = 0; m < n_views; ++m) {
    std::size_t idx = 0, n_features = 0;
    if (!(in >> tag >> idx >> n_features) || tag != "view" || idx != m) throw bad();
    model.margins[m].resize(n_features);
    for (auto& margin : model.margins[m]) {
      std::size_t n_distinct = 0;
      if (!(in >> margin.n_obs >> n_distinct)) throw bad();
      margin.values.resize(n_distinct);
      margin.ranks.resize(n_distinct);
      margin.zscores.resize(n_distinct);
      const double denom = static_cast<double>(margin.n_obs + 1);
      for (std::size_t k = 0; k < n_distinct; ++k) {
        std::string pair;
        if (!(in >> pair)) throw bad();
        const auto colon = pair.rfind(':');
        if (colon == std::string::npos) throw bad();
        margin.values[k] = std::strtod(pair.substr(0, colon).c_str(), nullptr);
        margin.ranks[k] = std::strtoll(pair.substr(colon + 1).c_str(), nullptr, 10);
        margin.zscores[k] = std_normal_quantile(static_cast<double>(margin.ranks[k]) / denom);
      }
    }
  }
  return model;
}

}  // namespace mvfr
