#include <doctest.h>

#include <fstream>

#include "semcomp/whiten.hpp"
#include "support.hpp"

using namespace semcomp;

TEST_CASE("center small cases") {
  RowMatrix v(2, 2);
  v << 1, 3, 3, 5;
  const auto c = center(RepresentationMatrix(v, Stage::raw));
  CHECK(c.mean(0) == doctest::Approx(2));
  CHECK(c.mean(1) == doctest::Approx(4));
  RowMatrix expected(2, 2);
  expected << -1, -1, 1, 1;
  CHECK(c.centered.values == expected);
  CHECK(c.centered.stage == Stage::centered);

  RowMatrix already(2, 1);
  already << -1, 1;
  const auto c2 = center(RepresentationMatrix(already, Stage::raw));
  CHECK(c2.mean(0) == 0.0);
  CHECK(c2.centered.values == already);

  CHECK_THROWS_AS(center(RepresentationMatrix(RowMatrix(0, 3), Stage::raw)), Error);
}

TEST_CASE("center: random column sums vanish and reconstruction holds") {
  std::mt19937_64 rng(1);
  RowMatrix x = testsupport::random_matrix(rng, 50, 5);
  x.array() += 3.0;
  const auto c = center(RepresentationMatrix(x, Stage::raw));
  for (Eigen::Index j = 0; j < 5; ++j) {
    double s = 0;
    for (Eigen::Index i = 0; i < 50; ++i) s += c.centered.values(i, j);
    CHECK(std::abs(s) < 1e-9);
  }
  const RowMatrix back = c.centered.values.rowwise() + c.mean.transpose();
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("diagonal covariance whitens to identity") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix x(4000, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = std::sqrt(2.0) * normal(rng);
    x(i, 1) = std::sqrt(0.5) * normal(rng);
  }
  const auto fit = fit_whiten(RepresentationMatrix(x, Stage::raw), 2);
  const auto cov = testsupport::brute_covariance(fit.z.values);
  CHECK((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(fit.z.stage == Stage::whitened);
  CHECK(fit.model.explained_variance(0) >= fit.model.explained_variance(1));
}

TEST_CASE("full-rank data, d = D, brute-force covariance") {
  std::mt19937_64 rng(3);
  RowMatrix x = testsupport::random_matrix(rng, 300, 8) * testsupport::random_matrix(rng, 8, 8);
  const auto fit = fit_whiten(RepresentationMatrix(x, Stage::raw), 8);
  const auto cov = testsupport::brute_covariance(fit.z.values);
  CHECK((cov - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-6);
  for (Eigen::Index i = 1; i < fit.model.explained_variance.size(); ++i) {
    CHECK(fit.model.explained_variance(i) <= fit.model.explained_variance(i - 1));
    CHECK(fit.model.explained_variance(i) >= 0);
  }
  // projection columns scaled by sqrt(eigenvalue) are orthonormal eigenvectors
  Matrix scaled = fit.model.projection;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) scaled.col(j) *= std::sqrt(fit.model.explained_variance(j));
  const Matrix gram = scaled.transpose() * scaled;
  CHECK((gram - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rank deficiency and range errors") {
  std::mt19937_64 rng(4);
  const RowMatrix x = testsupport::random_matrix(rng, 100, 3) * testsupport::random_matrix(rng, 3, 6);
  CHECK_THROWS_WITH_AS(fit_whiten(RepresentationMatrix(x, Stage::raw), 5), doctest::Contains("rank"), Error);
  CHECK_NOTHROW(fit_whiten(RepresentationMatrix(x, Stage::raw), 3));
  CHECK_THROWS_AS(fit_whiten(RepresentationMatrix(x, Stage::raw), 0), Error);
  CHECK_THROWS_AS(fit_whiten(RepresentationMatrix(x, Stage::raw), 7), Error);
}

TEST_CASE("apply_whiten matches fit and a scripted recomputation") {
  std::mt19937_64 rng(5);
  const RowMatrix x = testsupport::random_matrix(rng, 200, 6);
  const auto fit = fit_whiten(RepresentationMatrix(x, Stage::raw), 4);
  const auto again = apply_whiten(fit.model, RepresentationMatrix(x, Stage::raw));
  CHECK((again.values - fit.z.values).cwiseAbs().maxCoeff() < 1e-9);

  RowMatrix mean_row(1, 6);
  for (Eigen::Index j = 0; j < 6; ++j) mean_row(0, j) = fit.model.mean(j);
  CHECK(apply_whiten(fit.model, RepresentationMatrix(mean_row, Stage::raw)).values.cwiseAbs().maxCoeff() < 1e-12);

  const RowMatrix held = testsupport::random_matrix(rng, 10, 6);
  const auto z = apply_whiten(fit.model, RepresentationMatrix(held, Stage::raw));
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index c = 0; c < 4; ++c) {
      double s = 0;
      for (Eigen::Index j = 0; j < 6; ++j) s += (held(i, j) - fit.model.mean(j)) * fit.model.projection(j, c);
      CHECK(z.values(i, c) == doctest::Approx(s).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(apply_whiten(fit.model, RepresentationMatrix(RowMatrix::Zero(2, 5), Stage::raw)), Error);
}

TEST_CASE("whitening model persists") {
  std::mt19937_64 rng(6);
  const auto fit = fit_whiten(RepresentationMatrix(testsupport::random_matrix(rng, 60, 5), Stage::raw), 3);
  testsupport::TempDir dir("whiten");
  save_whitening(fit.model, dir / "model");
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "model/manifest.json"));
  CHECK(manifest["input_dims"] == 5);
  CHECK(manifest["reduced_dims"] == 3);
  const auto back = load_whitening(dir / "model");
  CHECK(back.mean == fit.model.mean);
  CHECK(back.projection == fit.model.projection);
  CHECK(back.explained_variance == fit.model.explained_variance);
}
