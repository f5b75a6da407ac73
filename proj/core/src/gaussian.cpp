#include "ngflow/gaussian.hpp"

#include <cmath>

#include "ngflow/errors.hpp"

namespace ngflow {

void CompletionTask::validate() const {
  if (target.rows() != target.cols()) throw StructuralError("completion target must be square");
  if (mask.rows() != target.rows() || mask.cols() != target.cols())
    throw StructuralError("mask and target shapes differ");
  if (mask.count() == 0) throw ArgumentError("completion task has no observed entries");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma))
    throw ArgumentError("noise_sigma must be positive");
}

double mc_loss(const CompletionTask& task, const Eigen::MatrixXd& beta) {
  return 0.5 * mc_grad(task, beta).squaredNorm();
}

Eigen::MatrixXd mc_grad(const CompletionTask& task, const Eigen::MatrixXd& beta) {
  if (beta.rows() != task.target.rows() || beta.cols() != task.target.cols())
    throw StructuralError("hypothesis shape does not match completion target");
  return task.mask.select(beta - task.target, Eigen::MatrixXd::Zero(beta.rows(), beta.cols()));
}

GaussianFisher fisher_gaussian(const CompletionTask& task) {
  return {1.0 / (task.noise_sigma * task.noise_sigma)};
}

}  // namespace ngflow
