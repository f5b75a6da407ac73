#pragma once

// Squared-error matrix completion under an isotropic Gaussian observation
// model. Loss: 1/2 sum over observed (i,j) of (beta_ij - target_ij)^2.

#include <Eigen/Dense>

namespace ngflow {

using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct CompletionTask {
  Eigen::MatrixXd target;
  MaskMatrix mask;  // true = observed
  double noise_sigma = 1.0;

  void validate() const;
  Eigen::Index dim() const { return target.rows(); }
  Eigen::Index observed_count() const { return mask.count(); }
};

double mc_loss(const CompletionTask& task, const Eigen::MatrixXd& beta);

/// (beta - target) on observed entries, zero elsewhere.
Eigen::MatrixXd mc_grad(const CompletionTask& task, const Eigen::MatrixXd& beta);

/// F(beta) = I / sigma^2 on the D^2-dimensional hypothesis space, held
/// symbolically as its scale.
struct GaussianFisher {
  double scale = 1.0;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const { return scale * m; }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& m) const { return m / scale; }
};

GaussianFisher fisher_gaussian(const CompletionTask& task);

}  // namespace ngflow
