#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace semcomp {

/// Thrown for any contract or data error inside the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Which pipeline step produced a matrix. Operations that care about
/// provenance check it; the on-disk format does not store it.
enum class Stage { raw, centered, whitened, components, normalized };

std::string_view to_string(Stage stage);

/// Dense words x dimensions matrix (hidden states X, components M, normalized N).
struct RepresentationMatrix {
  RowMatrix values;
  Stage stage = Stage::raw;

  RepresentationMatrix() = default;
  RepresentationMatrix(RowMatrix v, Stage s) : values(std::move(v)), stage(s) {}

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
  bool all_finite() const { return values.allFinite(); }

  friend bool operator==(const RepresentationMatrix& a, const RepresentationMatrix& b) {
    return a.stage == b.stage && a.values.rows() == b.values.rows() &&
           a.values.cols() == b.values.cols() && a.values == b.values;
  }
};

/// Packed bit matrix B, words x components. Each row occupies a whole number
/// of 64-bit blocks; padding bits are always zero.
class BinaryFeatureMatrix {
 public:
  BinaryFeatureMatrix() = default;
  BinaryFeatureMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t blocks_per_row() const { return blocks_; }

  bool get(std::size_t row, std::size_t col) const {
    return (bits_[row * blocks_ + col / 64] >> (col % 64)) & 1u;
  }
  void set(std::size_t row, std::size_t col, bool value);

  const std::uint64_t* row_blocks(std::size_t row) const { return bits_.data() + row * blocks_; }

  std::size_t count() const;
  std::size_t row_count(std::size_t row) const;
  std::size_t column_count(std::size_t col) const;

  /// Column-major copy: one packed bitset (over rows) per column.
  std::vector<std::vector<std::uint64_t>> column_sets() const;

  friend bool operator==(const BinaryFeatureMatrix&, const BinaryFeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t blocks_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// Ordered word list; row index of every matrix equals the word's position.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  std::uint64_t count(std::size_t i) const { return counts_.at(i); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  /// Appends a word; throws on duplicates.
  void add(std::string word, std::uint64_t count);
  /// Row index of the word, or -1.
  std::ptrdiff_t find(std::string_view word) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace semcomp
