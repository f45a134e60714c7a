#include "semcomp/fastica.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "semcomp/log.hpp"
#include "semcomp/matrixio.hpp"

namespace semcomp {

std::string_view to_string(Nonlinearity g) {
  switch (g) {
    case Nonlinearity::logcosh: return "logcosh";
    case Nonlinearity::exp: return "exp";
    case Nonlinearity::cube: return "cube";
  }
  return "logcosh";
}

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "logcosh") return Nonlinearity::logcosh;
  if (name == "exp") return Nonlinearity::exp;
  if (name == "cube") return Nonlinearity::cube;
  throw Error("unknown nonlinearity: " + std::string(name));
}

void IcaConfig::validate(std::size_t whitened_dims) const {
  const std::size_t c = n_components == 0 ? whitened_dims : n_components;
  if (c < 1 || c > whitened_dims) {
    throw Error("ica: n_components " + std::to_string(c) + " must be in [1, " + std::to_string(whitened_dims) + "]");
  }
  if (!(tol > 0.0)) throw Error("ica: tol must be positive");
  if (max_iter < 1) throw Error("ica: max_iter must be at least 1");
}

Matrix symmetric_decorrelation(const Matrix& w) {
  if (w.rows() == 0 || w.rows() > w.cols()) throw Error("symmetric_decorrelation: need 1 <= rows <= cols");
  const Matrix gram = w * w.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) throw Error("symmetric_decorrelation: eigendecomposition failed");
  const Vector& s = eig.eigenvalues();
  if (!(s.minCoeff() > 1e-14 * std::max(1.0, s.maxCoeff()))) throw Error("symmetric_decorrelation: singular matrix");
  const Matrix& u = eig.eigenvectors();
  return u * s.cwiseSqrt().cwiseInverse().asDiagonal() * u.transpose() * w;
}

namespace {

// Covariance of an evenly spaced sample of at most 1000 rows versus identity.
double whiteness_deviation(const RowMatrix& z) {
  const Eigen::Index n = z.rows();
  const Eigen::Index take = std::min<Eigen::Index>(n, 1000);
  RowMatrix sample(take, z.cols());
  for (Eigen::Index i = 0; i < take; ++i) sample.row(i) = z.row(i * n / take);
  if (take < 2) return 0.0;
  const RowMatrix centered = sample.rowwise() - sample.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(take - 1);
  return (cov - Matrix::Identity(cov.rows(), cov.cols())).cwiseAbs().maxCoeff();
}

// Writes g(u) into `u` in place and returns the column means of g'(u).
Vector apply_nonlinearity(Nonlinearity g, RowMatrix& u) {
  Vector mean_deriv = Vector::Zero(u.cols());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
      const double x = u(i, c);
      double gx = 0.0;
      double dgx = 0.0;
      switch (g) {
        case Nonlinearity::logcosh: {
          gx = std::tanh(x);
          dgx = 1.0 - gx * gx;
          break;
        }
        case Nonlinearity::exp: {
          const double e = std::exp(-0.5 * x * x);
          gx = x * e;
          dgx = (1.0 - x * x) * e;
          break;
        }
        case Nonlinearity::cube: {
          gx = x * x * x;
          dgx = 3.0 * x * x;
          break;
        }
      }
      u(i, c) = gx;
      mean_deriv(c) += dgx;
    }
  }
  return mean_deriv / static_cast<double>(u.rows());
}

}  // namespace

IcaFit fit_ica(const RepresentationMatrix& z, const IcaConfig& cfg) {
  const std::size_t d = z.cols();
  if (z.rows() < 2 || d == 0) throw Error("ica: need at least two rows and one column");
  cfg.validate(d);
  if (!z.all_finite()) throw Error("ica: input contains non-finite values");
  if (z.values.cwiseAbs().maxCoeff() == 0.0) throw Error("ica: degenerate all-zero input");

  const double deviation = whiteness_deviation(z.values);
  if (deviation > 0.5) {
    throw Error("ica: input is not whitened (covariance deviates from identity by " + std::to_string(deviation) +
                "); run whitening first");
  }
  if (deviation > 0.1) log::warn("ica.not_white", {{"max_deviation", deviation}});

  const std::size_t c = cfg.n_components == 0 ? d : cfg.n_components;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = normal(rng);
  w = symmetric_decorrelation(w);

  const double n = static_cast<double>(z.rows());
  IcaModel model;
  model.seed = cfg.seed;
  model.nonlinearity = cfg.nonlinearity;
  model.tol = cfg.tol;
  double change = 0.0;
  for (std::size_t iter = 1; iter <= cfg.max_iter; ++iter) {
    RowMatrix projected = z.values * w.transpose();  // n x c
    const Vector mean_deriv = apply_nonlinearity(cfg.nonlinearity, projected);
    Matrix updated = (projected.transpose() * z.values) / n - mean_deriv.asDiagonal() * w;
    updated = symmetric_decorrelation(updated);
    change = ((updated * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = std::move(updated);
    model.n_iter = iter;
    if (change < cfg.tol) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged) {
    log::warn("ica.not_converged", {{"max_iter", cfg.max_iter}, {"last_change", change}, {"tol", cfg.tol}});
  }
  model.unmixing = std::move(w);

  RowMatrix m = z.values * model.unmixing.transpose();
  return {std::move(model), RepresentationMatrix(std::move(m), Stage::components)};
}

double amari_index(const Matrix& unmixing, const Matrix& mixing) {
  if (unmixing.cols() != mixing.rows() || unmixing.rows() != mixing.cols()) {
    throw Error("amari_index: dimension mismatch (" + std::to_string(unmixing.rows()) + "x" +
                std::to_string(unmixing.cols()) + " vs " + std::to_string(mixing.rows()) + "x" +
                std::to_string(mixing.cols()) + ")");
  }
  const Matrix p = (unmixing * mixing).cwiseAbs();
  const auto k = p.rows();
  if (k < 2) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double row_max = p.row(i).maxCoeff();
    if (row_max == 0.0) throw Error("amari_index: zero row in global system");
    total += p.row(i).sum() / row_max - 1.0;
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const double col_max = p.col(j).maxCoeff();
    if (col_max == 0.0) throw Error("amari_index: zero column in global system");
    total += p.col(j).sum() / col_max - 1.0;
  }
  return total / (2.0 * static_cast<double>(k) * static_cast<double>(k - 1));
}

Matrix compose_unmixing(const WhiteningModel& whitening, const IcaModel& ica) {
  return ica.unmixing * whitening.projection.transpose();
}

void save_ica(const IcaModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix({RowMatrix(model.unmixing), Stage::raw}, dir / "unmixing.scm");
  nlohmann::ordered_json manifest;
  manifest["seed"] = model.seed;
  manifest["n_iter"] = model.n_iter;
  manifest["converged"] = model.converged;
  manifest["nonlinearity"] = to_string(model.nonlinearity);
  manifest["tol"] = model.tol;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

IcaModel load_ica(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  IcaModel model;
  model.unmixing = read_matrix(dir / "unmixing.scm").values;
  model.seed = manifest.at("seed").get<std::uint64_t>();
  model.n_iter = manifest.at("n_iter").get<std::size_t>();
  model.converged = manifest.at("converged").get<bool>();
  model.nonlinearity = parse_nonlinearity(manifest.at("nonlinearity").get<std::string>());
  model.tol = manifest.at("tol").get<double>();
  return model;
}

}  // namespace semcomp
