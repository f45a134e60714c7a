#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/types.hpp"

namespace semcomp {

/// Binarization threshold, strictly inside (0, 1).
class Threshold {
 public:
  explicit Threshold(double t);
  double value() const { return t_; }

 private:
  double t_;
};

enum class End { positive, negative };

std::string_view to_string(End end);

struct ComponentMeta {
  std::size_t index = 0;
  int orientation = +1;  ///< +1 or -1
  std::optional<std::string> positive_name;
  std::optional<std::string> negative_name;
  std::optional<std::string> chosen_name;
  std::size_t active_count = 0;

  /// chosen_name if set, otherwise the component number.
  std::string label() const;

  friend bool operator==(const ComponentMeta&, const ComponentMeta&) = default;
};

/// Name used for a component: the positive end's name when orientation is +1.
std::optional<std::string> select_name(int orientation, const std::optional<std::string>& positive_name,
                                       const std::optional<std::string>& negative_name);

struct NormalizedRows {
  RepresentationMatrix normalized;
  std::vector<std::size_t> zero_rows;
};

/// N[i,c] = M[i,c] / |M_i|. Zero rows stay zero and are listed.
NormalizedRows normalize_rows(const RepresentationMatrix& m);

/// B[i,c] = 1 iff |N[i,c]| > t.
BinaryFeatureMatrix binarize(const RepresentationMatrix& n, Threshold t);

/// Majority sign of M over each component's active words; ties and empty
/// components are oriented +1.
std::vector<ComponentMeta> orient_components(const RepresentationMatrix& m, const BinaryFeatureMatrix& b);

/// Row indices sorted by N[., component] (descending for the positive end,
/// ascending for the negative end), ties by row index.
std::vector<std::size_t> top_rows(const RepresentationMatrix& n, std::size_t component, End end, std::size_t count);
std::vector<std::string> top_words(const RepresentationMatrix& n, const Vocabulary& vocab, std::size_t component,
                                   End end, std::size_t count);

// Composition queries. A set of required features picks out the words that
// carry all of them; a set of words shares the features every one of them has.
std::vector<std::size_t> rows_with_all(const BinaryFeatureMatrix& b, const std::vector<std::size_t>& components);
std::vector<std::string> words_with_all(const BinaryFeatureMatrix& b, const Vocabulary& vocab,
                                        const std::vector<std::size_t>& components);
std::vector<std::size_t> shared_features(const BinaryFeatureMatrix& b, const std::vector<std::size_t>& rows);

struct DensityPoint {
  double t = 0.0;
  double density = 0.0;           ///< fraction of bits set
  double mean_active_per_word = 0.0;
  std::size_t empty_components = 0;
};

/// Active-bit density of binarize(n, t) for each t.
std::vector<DensityPoint> threshold_sweep(const RepresentationMatrix& n, const std::vector<double>& thresholds);
std::vector<double> default_sweep_thresholds();

nlohmann::ordered_json metas_to_json(const std::vector<ComponentMeta>& metas);
std::vector<ComponentMeta> metas_from_json(const nlohmann::json& j);

}  // namespace semcomp
