#pragma once

// Synthetic datasets and completion tasks. Every generator is a pure
// function of its parameters and seed.

#include <cstdint>

#include <Eigen/Dense>

#include "ngflow/gaussian.hpp"
#include "ngflow/logistic.hpp"

namespace ngflow {

/// Two-cluster 2D geometry. Each class mixes a "tall" cluster (centre with a
/// large second coordinate) and a "wide" cluster (large first coordinate,
/// small second); negatives mirror positives through the origin. The first
/// coordinate alone separates the classes, but the best l2 separator tilts
/// towards the tall cluster.
struct Toy2dParams {
  int n_per_class = 20;
  Eigen::Vector2d tall_center{1.0, 2.0};
  Eigen::Vector2d wide_center{2.0, -0.3};
  double tall_fraction = 0.2;
  /// Half-normal jitter pushed away from the separator.
  double jitter = 0.15;

  void validate() const;
};

struct SparseParams {
  int dim = 50;
  int sparsity = 5;
  int n_train = 25;
  int n_test = 2000;
  int n_population = 2000;

  void validate() const;
};

struct CompletionParams {
  int dim = 20;
  int rank = 2;
  int n_observed = 120;
  double noise_sigma = 1.0;

  void validate() const;
};

ClassificationDataset gen_toy2d(const Toy2dParams& params, std::uint64_t seed);

struct SparseSplits {
  ClassificationDataset train;
  ClassificationDataset test;
  ClassificationDataset population;
  Eigen::VectorXd ground_truth;
};

/// Standard Gaussian design, beta_dagger = (1,...,1,0,...,0) with `sparsity`
/// ones, labels sign(x^T beta_dagger); rows on the separator are redrawn.
SparseSplits gen_sparse(const SparseParams& params, std::uint64_t seed);

/// target = U V / sqrt(R) with standard Gaussian U (D x R) and V (R x D);
/// n_observed entries observed, drawn uniformly without replacement.
CompletionTask gen_completion(const CompletionParams& params, std::uint64_t seed);

}  // namespace ngflow
