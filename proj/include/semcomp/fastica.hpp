#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "semcomp/types.hpp"
#include "semcomp/whiten.hpp"

namespace semcomp {

enum class Nonlinearity { logcosh, exp, cube };

std::string_view to_string(Nonlinearity g);
Nonlinearity parse_nonlinearity(std::string_view name);

struct IcaConfig {
  std::size_t n_components = 0;  ///< 0 means "all whitened dims"
  std::size_t max_iter = 500;
  double tol = 1e-5;
  Nonlinearity nonlinearity = Nonlinearity::logcosh;
  std::uint64_t seed = 0;

  void validate(std::size_t whitened_dims) const;
};

/// Rows of `unmixing` are orthonormal filters in whitened space
/// (n_components x d); components are M = Z * unmixing^T.
struct IcaModel {
  Matrix unmixing;
  std::size_t n_iter = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  Nonlinearity nonlinearity = Nonlinearity::logcosh;
  double tol = 0.0;
};

struct IcaFit {
  IcaModel model;
  RepresentationMatrix components;
};

/// Parallel FastICA with symmetric decorrelation.
///
/// The input must already be whitened. A covariance spot check on up to
/// 1000 evenly spaced rows warns when any entry deviates from the identity by
/// more than 0.1 and rejects the input beyond 0.5. Failing to converge within
/// max_iter is reported through the log and the model's `converged` flag.
IcaFit fit_ica(const RepresentationMatrix& z, const IcaConfig& cfg);

/// (W W^T)^{-1/2} W. Requires W to have full row rank.
Matrix symmetric_decorrelation(const Matrix& w);

/// Amari index of the global system P = unmixing * mixing (column-vector
/// convention, x = A s, y = W x). Normalized to [0, 1]; zero iff P is a
/// scaled permutation.
double amari_index(const Matrix& unmixing, const Matrix& mixing);

/// Unmixing from the original (uncentered) input space: components = (x - mean) * result^T.
Matrix compose_unmixing(const WhiteningModel& whitening, const IcaModel& ica);

void save_ica(const IcaModel& model, const std::filesystem::path& dir);
IcaModel load_ica(const std::filesystem::path& dir);

}  // namespace semcomp
