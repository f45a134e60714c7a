#pragma once

#include <vector>

#include "semcomp/types.hpp"

namespace semcomp {

/// Maximum-weight assignment of rows to columns (Hungarian method).
/// result[r] is the column assigned to row r, or -1 when rows > cols.
std::vector<int> max_weight_assignment(const Matrix& weights);

/// Greedy matching on |weights|: repeatedly take the largest remaining entry.
std::vector<int> greedy_assignment(const Matrix& weights);

/// Pearson correlation between every column of `a` and every column of `b`.
Matrix column_correlations(const RowMatrix& a, const RowMatrix& b);

struct CorrelationMatch {
  std::vector<int> assignment;     ///< estimated column -> true column
  std::vector<double> abs_r;       ///< |r| per matched estimated column
  double mean_abs_r = 0.0;
};

CorrelationMatch match_by_correlation(const RowMatrix& estimated, const RowMatrix& truth);

struct F1Match {
  std::vector<int> assignment;  ///< recovered component -> true feature
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t actual = 0;
  double micro_f1 = 0.0;
};

/// Best permutation-matched micro-F1 between recovered and true binary matrices.
/// Binarization takes |N| so component sign does not affect the match.
F1Match match_binary(const BinaryFeatureMatrix& recovered, const BinaryFeatureMatrix& truth);

}  // namespace semcomp
