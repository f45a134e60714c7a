#pragma once

#include <filesystem>

#include "semcomp/types.hpp"

namespace semcomp {

/// Centering + PCA projection. For input X (n x D), Z = (X - mean) * projection
/// has d columns with identity sample covariance (n - 1 denominator), ordered
/// by descending explained variance.
struct WhiteningModel {
  Vector mean;                ///< length D
  Matrix projection;          ///< D x d
  Vector explained_variance;  ///< length d, non-increasing

  std::size_t input_dims() const { return static_cast<std::size_t>(projection.rows()); }
  std::size_t reduced_dims() const { return static_cast<std::size_t>(projection.cols()); }
};

struct Centered {
  RepresentationMatrix centered;
  Vector mean;
};

Centered center(const RepresentationMatrix& x);

struct WhiteningFit {
  WhiteningModel model;
  RepresentationMatrix z;
};

/// Eigenvalues below this fraction of the largest are treated as rank deficiency.
inline constexpr double kRankTolerance = 1e-12;

WhiteningFit fit_whiten(const RepresentationMatrix& x, std::size_t d);
RepresentationMatrix apply_whiten(const WhiteningModel& model, const RepresentationMatrix& x);

/// Directory with mean.scm (1 x D), projection.scm (D x d),
/// explained_variance.scm (1 x d) and manifest.json.
void save_whitening(const WhiteningModel& model, const std::filesystem::path& dir);
WhiteningModel load_whitening(const std::filesystem::path& dir);

}  // namespace semcomp
