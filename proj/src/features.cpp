#include "semcomp/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semcomp {

Threshold::Threshold(double t) : t_(t) {
  if (!(t > 0.0 && t < 1.0)) throw Error("threshold must lie strictly between 0 and 1, got " + std::to_string(t));
}

std::string_view to_string(End end) { return end == End::positive ? "+" : "-"; }

std::string ComponentMeta::label() const { return chosen_name ? *chosen_name : std::to_string(index); }

std::optional<std::string> select_name(int orientation, const std::optional<std::string>& positive_name,
                                       const std::optional<std::string>& negative_name) {
  return orientation >= 0 ? positive_name : negative_name;
}

NormalizedRows normalize_rows(const RepresentationMatrix& m) {
  if (m.stage != Stage::components && m.stage != Stage::normalized) {
    throw Error("normalize_rows: expected a component matrix, got stage " + std::string(to_string(m.stage)));
  }
  NormalizedRows out{RepresentationMatrix(m.values, Stage::normalized), {}};
  RowMatrix& values = out.normalized.values;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    double sq = 0.0;
    for (Eigen::Index c = 0; c < values.cols(); ++c) sq += values(i, c) * values(i, c);
    const double norm = std::sqrt(sq);
    if (norm == 0.0) {
      out.zero_rows.push_back(static_cast<std::size_t>(i));
      continue;
    }
    for (Eigen::Index c = 0; c < values.cols(); ++c) values(i, c) /= norm;
  }
  return out;
}

BinaryFeatureMatrix binarize(const RepresentationMatrix& n, Threshold t) {
  if (n.stage != Stage::normalized) {
    throw Error("binarize: expected a normalized matrix, got stage " + std::string(to_string(n.stage)));
  }
  BinaryFeatureMatrix b(n.rows(), n.cols());
  for (Eigen::Index i = 0; i < n.values.rows(); ++i)
    for (Eigen::Index c = 0; c < n.values.cols(); ++c)
      if (std::abs(n.values(i, c)) > t.value()) b.set(static_cast<std::size_t>(i), static_cast<std::size_t>(c), true);
  return b;
}

std::vector<ComponentMeta> orient_components(const RepresentationMatrix& m, const BinaryFeatureMatrix& b) {
  if (m.rows() != b.rows() || m.cols() != b.cols()) throw Error("orient_components: shape mismatch");
  std::vector<std::size_t> positive(b.cols(), 0), negative(b.cols(), 0);
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t c = 0; c < b.cols(); ++c) {
      if (!b.get(i, c)) continue;
      const double v = m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      if (v > 0) ++positive[c];
      else if (v < 0) ++negative[c];
    }
  }
  std::vector<ComponentMeta> metas(b.cols());
  for (std::size_t c = 0; c < b.cols(); ++c) {
    metas[c].index = c;
    metas[c].orientation = negative[c] > positive[c] ? -1 : +1;
    metas[c].active_count = b.column_count(c);
  }
  return metas;
}

std::vector<std::size_t> top_rows(const RepresentationMatrix& n, std::size_t component, End end, std::size_t count) {
  if (component >= n.cols()) {
    throw Error("component " + std::to_string(component) + " out of range (have " + std::to_string(n.cols()) + ")");
  }
  if (count < 1) throw Error("top_words: count must be at least 1");
  const auto col = n.values.col(static_cast<Eigen::Index>(component));
  std::vector<std::size_t> order(n.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double sign = end == End::positive ? 1.0 : -1.0;
  auto before = [&](std::size_t a, std::size_t b) {
    const double va = sign * col(static_cast<Eigen::Index>(a));
    const double vb = sign * col(static_cast<Eigen::Index>(b));
    return va != vb ? va > vb : a < b;
  };
  const std::size_t k = std::min(count, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
  order.resize(k);
  return order;
}

std::vector<std::string> top_words(const RepresentationMatrix& n, const Vocabulary& vocab, std::size_t component,
                                   End end, std::size_t count) {
  if (vocab.size() != n.rows()) throw Error("top_words: vocabulary does not match matrix rows");
  std::vector<std::string> words;
  for (auto row : top_rows(n, component, end, count)) words.push_back(vocab.word(row));
  return words;
}

std::vector<std::size_t> rows_with_all(const BinaryFeatureMatrix& b, const std::vector<std::size_t>& components) {
  if (components.empty()) throw Error("words_with_all: empty component set");
  std::vector<std::uint64_t> mask(b.blocks_per_row(), 0);
  for (auto c : components) {
    if (c >= b.cols()) throw Error("component " + std::to_string(c) + " out of range");
    mask[c / 64] |= std::uint64_t{1} << (c % 64);
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const std::uint64_t* row = b.row_blocks(i);
    bool all = true;
    for (std::size_t k = 0; k < mask.size() && all; ++k) all = (row[k] & mask[k]) == mask[k];
    if (all) rows.push_back(i);
  }
  return rows;
}

std::vector<std::string> words_with_all(const BinaryFeatureMatrix& b, const Vocabulary& vocab,
                                        const std::vector<std::size_t>& components) {
  if (vocab.size() != b.rows()) throw Error("words_with_all: vocabulary does not match matrix rows");
  std::vector<std::string> words;
  for (auto row : rows_with_all(b, components)) words.push_back(vocab.word(row));
  return words;
}

std::vector<std::size_t> shared_features(const BinaryFeatureMatrix& b, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw Error("shared_features: empty word set");
  std::vector<std::uint64_t> acc(b.blocks_per_row(), ~std::uint64_t{0});
  for (auto r : rows) {
    if (r >= b.rows()) throw Error("word row " + std::to_string(r) + " out of range");
    const std::uint64_t* row = b.row_blocks(r);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] &= row[k];
  }
  std::vector<std::size_t> components;
  for (std::size_t c = 0; c < b.cols(); ++c)
    if ((acc[c / 64] >> (c % 64)) & 1u) components.push_back(c);
  return components;
}

std::vector<double> default_sweep_thresholds() { return {0.05, 0.10, 0.15, 0.20, 0.25, 0.30}; }

std::vector<DensityPoint> threshold_sweep(const RepresentationMatrix& n, const std::vector<double>& thresholds) {
  std::vector<DensityPoint> points;
  for (double t : thresholds) {
    const auto b = binarize(n, Threshold(t));
    DensityPoint p;
    p.t = t;
    const double cells = static_cast<double>(b.rows() * b.cols());
    p.density = cells > 0 ? static_cast<double>(b.count()) / cells : 0.0;
    p.mean_active_per_word = b.rows() ? static_cast<double>(b.count()) / static_cast<double>(b.rows()) : 0.0;
    for (std::size_t c = 0; c < b.cols(); ++c) p.empty_components += b.column_count(c) == 0 ? 1 : 0;
    points.push_back(p);
  }
  return points;
}

nlohmann::ordered_json metas_to_json(const std::vector<ComponentMeta>& metas) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : metas) {
    nlohmann::ordered_json names = nlohmann::ordered_json::object();
    if (m.positive_name) names["positive"] = *m.positive_name;
    if (m.negative_name) names["negative"] = *m.negative_name;
    if (m.chosen_name) names["chosen"] = *m.chosen_name;
    nlohmann::ordered_json j;
    j["index"] = m.index;
    j["orientation"] = m.orientation;
    j["names"] = std::move(names);
    j["active_count"] = m.active_count;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<ComponentMeta> metas_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("component metadata must be a JSON array");
  std::vector<ComponentMeta> metas;
  for (const auto& item : j) {
    ComponentMeta m;
    m.index = item.at("index").get<std::size_t>();
    m.orientation = item.at("orientation").get<int>();
    if (m.orientation != 1 && m.orientation != -1) throw Error("orientation must be +1 or -1");
    m.active_count = item.at("active_count").get<std::size_t>();
    if (item.contains("names")) {
      const auto& names = item.at("names");
      if (names.contains("positive")) m.positive_name = names.at("positive").get<std::string>();
      if (names.contains("negative")) m.negative_name = names.at("negative").get<std::string>();
      if (names.contains("chosen")) m.chosen_name = names.at("chosen").get<std::string>();
    }
    metas.push_back(std::move(m));
  }
  return metas;
}

}  // namespace semcomp
