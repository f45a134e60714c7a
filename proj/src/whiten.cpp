#include "semcomp/whiten.hpp"

#include <json.hpp>

#include "semcomp/matrixio.hpp"

namespace semcomp {

Centered center(const RepresentationMatrix& x) {
  if (x.rows() == 0) throw Error("center: empty matrix");
  // Column means accumulated row by row in a fixed order.
  Vector mean = Vector::Zero(x.values.cols());
  for (Eigen::Index i = 0; i < x.values.rows(); ++i) mean += x.values.row(i).transpose();
  mean /= static_cast<double>(x.rows());
  RowMatrix centered = x.values.rowwise() - mean.transpose();
  return {RepresentationMatrix(std::move(centered), Stage::centered), std::move(mean)};
}

WhiteningFit fit_whiten(const RepresentationMatrix& x, std::size_t d) {
  const std::size_t n = x.rows();
  const std::size_t dims = x.cols();
  if (n < 2 || d < 1 || d > std::min(n - 1, dims)) {
    throw Error("fit_whiten: target dims " + std::to_string(d) + " out of range [1, " +
                std::to_string(n < 2 ? 0 : std::min(n - 1, dims)) + "]");
  }
  if (!x.all_finite()) throw Error("fit_whiten: input contains non-finite values");

  auto [xc, mean] = center(x);
  const Matrix cov = (xc.values.transpose() * xc.values) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("fit_whiten: eigendecomposition failed");
  // Eigen returns ascending order.
  const Vector& values = eig.eigenvalues();
  const Matrix& vectors = eig.eigenvectors();
  const Eigen::Index last = values.size() - 1;
  const double largest = values(last);
  if (!(largest > 0.0)) throw Error("fit_whiten: data has zero variance");

  Matrix projection(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(d));
  Vector explained(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d); ++k) {
    const double lambda = values(last - k);
    if (lambda < kRankTolerance * largest) {
      throw Error("fit_whiten: rank deficient, eigenvalue " + std::to_string(k) + " is " +
                  std::to_string(lambda) + " (below 1e-12 of the largest)");
    }
    Vector v = vectors.col(last - k);
    // Pin the sign so repeated fits give identical projections.
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0) v = -v;
    projection.col(k) = v / std::sqrt(lambda);
    explained(k) = lambda;
  }

  RowMatrix z = xc.values * projection;
  return {WhiteningModel{std::move(mean), std::move(projection), std::move(explained)},
          RepresentationMatrix(std::move(z), Stage::whitened)};
}

RepresentationMatrix apply_whiten(const WhiteningModel& model, const RepresentationMatrix& x) {
  if (x.cols() != model.input_dims()) {
    throw Error("apply_whiten: dimension mismatch, model expects " + std::to_string(model.input_dims()) +
                " columns, got " + std::to_string(x.cols()));
  }
  RowMatrix z = (x.values.rowwise() - model.mean.transpose()) * model.projection;
  return {std::move(z), Stage::whitened};
}

void save_whitening(const WhiteningModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix({RowMatrix(model.mean.transpose()), Stage::raw}, dir / "mean.scm");
  write_matrix({RowMatrix(model.projection), Stage::raw}, dir / "projection.scm");
  write_matrix({RowMatrix(model.explained_variance.transpose()), Stage::raw}, dir / "explained_variance.scm");
  nlohmann::ordered_json manifest;
  manifest["input_dims"] = model.input_dims();
  manifest["reduced_dims"] = model.reduced_dims();
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

WhiteningModel load_whitening(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  const auto input_dims = manifest.at("input_dims").get<std::size_t>();
  const auto reduced_dims = manifest.at("reduced_dims").get<std::size_t>();
  const auto mean = read_matrix(dir / "mean.scm");
  const auto projection = read_matrix(dir / "projection.scm");
  const auto explained = read_matrix(dir / "explained_variance.scm");
  if (mean.rows() != 1 || mean.cols() != input_dims || projection.rows() != input_dims ||
      projection.cols() != reduced_dims || explained.rows() != 1 || explained.cols() != reduced_dims) {
    throw Error("whitening model in " + dir.string() + " is inconsistent with its manifest");
  }
  return {mean.values.row(0).transpose(), Matrix(projection.values), explained.values.row(0).transpose()};
}

}  // namespace semcomp
