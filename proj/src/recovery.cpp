#include "semcomp/recovery.hpp"

#include <algorithm>
#include <bit>
#include <limits>

namespace semcomp {

std::vector<int> max_weight_assignment(const Matrix& weights) {
  const int rows = static_cast<int>(weights.rows());
  const int cols = static_cast<int>(weights.cols());
  if (rows == 0) return {};
  // Square cost matrix, padded with zeros; minimize (max - w).
  const int n = std::max(rows, cols);
  const double top = cols > 0 ? weights.maxCoeff() : 0.0;
  Matrix cost = Matrix::Constant(n, n, top);
  cost.topLeftCorner(rows, cols) = (top - weights.array()).matrix();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (r >= rows || c >= cols) cost(r, c) = top;

  // Jonker-Volgenant style O(n^3) potentials, 1-based.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> result(rows, -1);
  for (int j = 1; j <= n; ++j) {
    const int r = p[j] - 1;
    if (r < rows && j - 1 < cols) result[r] = j - 1;
  }
  return result;
}

std::vector<int> greedy_assignment(const Matrix& weights) {
  const Eigen::Index rows = weights.rows();
  const Eigen::Index cols = weights.cols();
  std::vector<int> result(rows, -1);
  std::vector<char> row_used(rows, 0), col_used(cols, 0);
  for (Eigen::Index step = 0; step < std::min(rows, cols); ++step) {
    double best = -1.0;
    Eigen::Index br = -1, bc = -1;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (row_used[r]) continue;
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (col_used[c]) continue;
        const double w = std::abs(weights(r, c));
        if (w > best) {
          best = w;
          br = r;
          bc = c;
        }
      }
    }
    row_used[br] = col_used[bc] = 1;
    result[br] = static_cast<int>(bc);
  }
  return result;
}

Matrix column_correlations(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() != b.rows()) throw Error("column_correlations: row counts differ");
  const RowMatrix ac = a.rowwise() - a.colwise().mean();
  const RowMatrix bc = b.rowwise() - b.colwise().mean();
  const Vector an = ac.colwise().norm();
  const Vector bn = bc.colwise().norm();
  Matrix r = ac.transpose() * bc;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      r(i, j) = (an(i) > 0 && bn(j) > 0) ? r(i, j) / (an(i) * bn(j)) : 0.0;
  return r;
}

CorrelationMatch match_by_correlation(const RowMatrix& estimated, const RowMatrix& truth) {
  const Matrix r = column_correlations(estimated, truth);
  CorrelationMatch match;
  match.assignment = greedy_assignment(r);
  double sum = 0.0;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < match.assignment.size(); ++i) {
    const int j = match.assignment[i];
    const double v = j < 0 ? 0.0 : std::abs(r(static_cast<Eigen::Index>(i), j));
    match.abs_r.push_back(v);
    if (j >= 0) {
      sum += v;
      ++matched;
    }
  }
  match.mean_abs_r = matched ? sum / static_cast<double>(matched) : 0.0;
  return match;
}

F1Match match_binary(const BinaryFeatureMatrix& recovered, const BinaryFeatureMatrix& truth) {
  if (recovered.rows() != truth.rows()) throw Error("match_binary: row counts differ");
  const auto rec = recovered.column_sets();
  const auto tru = truth.column_sets();
  Matrix overlap(static_cast<Eigen::Index>(rec.size()), static_cast<Eigen::Index>(tru.size()));
  for (std::size_t a = 0; a < rec.size(); ++a) {
    for (std::size_t b = 0; b < tru.size(); ++b) {
      std::size_t n = 0;
      for (std::size_t k = 0; k < rec[a].size(); ++k) n += static_cast<std::size_t>(std::popcount(rec[a][k] & tru[b][k]));
      overlap(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = static_cast<double>(n);
    }
  }
  F1Match match;
  match.assignment = max_weight_assignment(overlap);
  for (std::size_t a = 0; a < match.assignment.size(); ++a) {
    if (match.assignment[a] >= 0) {
      match.true_positives += static_cast<std::size_t>(overlap(static_cast<Eigen::Index>(a), match.assignment[a]));
    }
  }
  match.predicted = recovered.count();
  match.actual = truth.count();
  const std::size_t denom = match.predicted + match.actual;
  match.micro_f1 = denom ? 2.0 * static_cast<double>(match.true_positives) / static_cast<double>(denom) : 1.0;
  return match;
}


}  // namespace semcomp
