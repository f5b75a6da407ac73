#pragma once

// Logistic loss on separable binary classification data.
//
// Conventions used throughout:
//   X~ = y (.) X   (rows of X multiplied by their labels)
//   s  = X beta    (logits),  u = y (.) s = X~ beta
//   loss(beta) = sum_n softplus(-u_n)
//   F(beta)    = (1/N) X^T diag[phi(s) phi(-s)] X   (sample-averaged Fisher)

#include <Eigen/Dense>

namespace ngflow {

/// Numerically stable scalar helpers. All are finite for |x| well beyond 700.
namespace stable {

/// 1 / (1 + e^{-x})
double sigmoid(double x);
/// log(1 + e^{x})
double softplus(double x);
/// log sigmoid(x) = -softplus(-x)
double log_sigmoid(double x);
/// sigmoid(x) * sigmoid(-x), without cancellation for large |x|.
double sigmoid_variance(double x);

}  // namespace stable

struct ClassificationDataset {
  Eigen::MatrixXd X;  // N x D
  Eigen::VectorXd y;  // entries in {-1, +1}

  /// Throws StructuralError / ArgumentError on shape mismatch, zero rows or
  /// labels outside {-1, +1}.
  void validate() const;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }

  /// X~ = y (.) X
  Eigen::MatrixXd signed_design() const;

  /// Dataset with design X A^T and the same labels.
  ClassificationDataset transformed(const Eigen::MatrixXd& A) const;
};

struct LogitState {
  Eigen::VectorXd s;
  Eigen::VectorXd u;
  double u_max = 0.0;

  static LogitState from(const ClassificationDataset& ds, const Eigen::VectorXd& beta);
  static LogitState from_logits(const Eigen::VectorXd& s, const Eigen::VectorXd& y);
};

enum class FisherWeighting { sample, population };

/// The Fisher in scale-extracted form: true Fisher = exp(scale_log) * matrix.
struct FisherSystem {
  Eigen::MatrixXd matrix;
  double scale_log = 0.0;
  FisherWeighting weighting = FisherWeighting::sample;

  Eigen::MatrixXd true_fisher() const;
};

double loss(const ClassificationDataset& ds, const Eigen::VectorXd& beta);

/// Gradient of the summed loss with respect to the logits s:
/// component i is -y_i (1 - phi(y_i s_i)).
Eigen::VectorXd grad_logits(const LogitState& state, const Eigen::VectorXd& y);

/// Diagonal of the logit-space Fisher, phi(s_i) phi(-s_i).
Eigen::VectorXd fisher_logits(const LogitState& state);

/// Exact gradient of the summed loss, -X~^T phi(-u).
Eigen::VectorXd grad_beta(const ClassificationDataset& ds, const Eigen::VectorXd& beta);

/// Sample-averaged Fisher of `ds` at beta. Passing `population` evaluates the
/// same formula on that dataset instead and marks the system as population
/// weighted.
FisherSystem fisher_beta(const ClassificationDataset& ds, const Eigen::VectorXd& beta,
                         const ClassificationDataset* population = nullptr);

}  // namespace ngflow
