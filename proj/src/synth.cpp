#include <cstdio>
#include <random>

#include "semcomp/harvest.hpp"

namespace semcomp {

void SyntheticSpec::validate() const {
  if (n_words < 1 || n_features < 1) throw Error("synthetic: need at least one word and one feature");
  if (n_features > dim) throw Error("synthetic: n_features must not exceed dim");
  if (!(noise_sigma >= 0.0)) throw Error("synthetic: noise_sigma must be non-negative");
  if (!(actives_per_word > 0.0) || actives_per_word > 0.95 * static_cast<double>(n_features)) {
    throw Error("synthetic: actives_per_word must lie in (0, 0.95 * n_features]");
  }
  if (identity_mixing && n_features != dim) throw Error("synthetic: identity mixing needs n_features == dim");
}

SyntheticData synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.5, 1.5);

  const auto k = static_cast<Eigen::Index>(spec.n_features);
  const auto n = static_cast<Eigen::Index>(spec.n_words);
  const auto dim = static_cast<Eigen::Index>(spec.dim);

  // Unequal per-feature rates summing to actives_per_word, capped at 0.95.
  SyntheticData data;
  std::vector<double> weights(spec.n_features);
  for (auto& w : weights) w = spread(rng);
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  for (double w : weights) data.rates.push_back(std::min(0.95, spec.actives_per_word * w / weight_sum));

  data.truth = BinaryFeatureMatrix(spec.n_words, spec.n_features);
  RowMatrix loadings = RowMatrix::Zero(n, k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index f = 0; f < k; ++f) {
      const bool active = unit(rng) < data.rates[static_cast<std::size_t>(f)];
      const double magnitude = 1.0 + std::abs(normal(rng));
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      if (active) {
        data.truth.set(static_cast<std::size_t>(i), static_cast<std::size_t>(f), true);
        loadings(i, f) = sign * magnitude;
      }
    }
  }

  if (spec.identity_mixing) {
    data.mixing = Matrix::Identity(k, dim);
  } else {
    data.mixing.resize(k, dim);
    for (Eigen::Index f = 0; f < k; ++f)
      for (Eigen::Index j = 0; j < dim; ++j) data.mixing(f, j) = normal(rng);
  }

  RowMatrix x = loadings * data.mixing;
  if (spec.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) x(i, j) += spec.noise_sigma * normal(rng);
  }
  data.x = RepresentationMatrix(std::move(x), Stage::raw);
  return data;
}

Vocabulary synthetic_vocab(std::size_t n_words) {
  Vocabulary vocab;
  char buf[32];
  for (std::size_t i = 0; i < n_words; ++i) {
    std::snprintf(buf, sizeof buf, "w%04zu", i);
    vocab.add(buf, 1);
  }
  return vocab;
}

}  // namespace semcomp
