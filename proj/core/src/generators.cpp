#include "ngflow/generators.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ngflow/errors.hpp"

namespace ngflow {

void Toy2dParams::validate() const {
  if (n_per_class < 2) throw ArgumentError("toy2d needs at least 2 points per class");
  if (!(tall_fraction >= 0.0 && tall_fraction <= 1.0))
    throw ArgumentError("tall_fraction must lie in [0, 1]");
  if (!(jitter >= 0.0)) throw ArgumentError("jitter must be >= 0");
  if (!(tall_center(0) > 0.0 && wide_center(0) > 0.0))
    throw ArgumentError("cluster centres need a positive first coordinate");
}

void SparseParams::validate() const {
  if (dim < 1) throw ArgumentError("sparse dim must be >= 1");
  if (sparsity < 1 || sparsity > dim) throw ArgumentError("sparsity must lie in [1, dim]");
  if (n_train < 1 || n_test < 1 || n_population < 1)
    throw ArgumentError("split sizes must be >= 1");
}

void CompletionParams::validate() const {
  if (dim < 1) throw ArgumentError("completion dim must be >= 1");
  if (rank < 1 || rank > dim) throw ArgumentError("rank must lie in [1, dim]");
  if (n_observed < 1 || n_observed > dim * dim)
    throw ArgumentError("n_observed must lie in [1, dim^2]");
  if (!(noise_sigma > 0.0)) throw ArgumentError("noise_sigma must be positive");
}

ClassificationDataset gen_toy2d(const Toy2dParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = params.n_per_class;
  const int n_tall = static_cast<int>(std::lround(params.tall_fraction * n));

  auto draw = [&](int i) {
    const Eigen::Vector2d& c = i < n_tall ? params.tall_center : params.wide_center;
    const double sy = c(1) >= 0.0 ? 1.0 : -1.0;
    const double jx = std::abs(normal(rng));
    const double jy = std::abs(normal(rng));
    return Eigen::Vector2d(c(0) + params.jitter * jx, c(1) + params.jitter * sy * jy);
  };

  ClassificationDataset ds;
  ds.X.resize(2 * n, 2);
  ds.y.resize(2 * n);
  for (int i = 0; i < n; ++i) {
    ds.X.row(i) = draw(i).transpose();
    ds.y(i) = 1.0;
  }
  for (int i = 0; i < n; ++i) {
    ds.X.row(n + i) = -ds.X.row(i);
    ds.y(n + i) = -1.0;
  }
  return ds;
}

SparseSplits gen_sparse(const SparseParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SparseSplits out;
  out.ground_truth = Eigen::VectorXd::Zero(params.dim);
  out.ground_truth.head(params.sparsity).setOnes();

  auto split = [&](int rows) {
    ClassificationDataset ds;
    ds.X.resize(rows, params.dim);
    ds.y.resize(rows);
    for (int n = 0; n < rows; ++n) {
      double margin = 0.0;
      do {
        for (int d = 0; d < params.dim; ++d) ds.X(n, d) = normal(rng);
        margin = ds.X.row(n).dot(out.ground_truth);
      } while (margin == 0.0);
      ds.y(n) = margin > 0.0 ? 1.0 : -1.0;
    }
    return ds;
  };
  out.train = split(params.n_train);
  out.test = split(params.n_test);
  out.population = split(params.n_population);
  return out;
}

CompletionTask gen_completion(const CompletionParams& params, std::uint64_t seed) {
  params.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int D = params.dim;
  const int R = params.rank;
  Eigen::MatrixXd U(D, R), V(R, D);
  for (int j = 0; j < R; ++j)
    for (int i = 0; i < D; ++i) U(i, j) = normal(rng);
  for (int j = 0; j < D; ++j)
    for (int i = 0; i < R; ++i) V(i, j) = normal(rng);

  CompletionTask task;
  task.target = U * V / std::sqrt(static_cast<double>(R));
  task.noise_sigma = params.noise_sigma;
  task.mask = MaskMatrix::Constant(D, D, false);

  // partial Fisher-Yates over column-major entry indices
  std::vector<int> cells(static_cast<std::size_t>(D) * D);
  std::iota(cells.begin(), cells.end(), 0);
  for (int k = 0; k < params.n_observed; ++k) {
    std::uniform_int_distribution<int> pick(k, static_cast<int>(cells.size()) - 1);
    std::swap(cells[k], cells[pick(rng)]);
    task.mask(cells[k] % D, cells[k] / D) = true;
  }
  return task;
}

}  // namespace ngflow
